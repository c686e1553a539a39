fn main() {
    std::process::exit(pickfreeze::cli::main_with_args(std::env::args_os()));
}
