fn main() {
    std::process::exit(facetproto::cli::run(std::env::args_os()));
}
