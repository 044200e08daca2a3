fn main() {
    std::process::exit(bslqb::cli::main_with_args(std::env::args_os()));
}
