fn main() {
    std::process::exit(degenfd::cli::main_with_args(std::env::args_os()));
}
