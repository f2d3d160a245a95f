fn main() {
    std::process::exit(mcfdd::cli::main_with_args(std::env::args_os()));
}
