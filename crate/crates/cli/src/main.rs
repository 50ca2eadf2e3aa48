fn main() {
    std::process::exit(btlab_cli::main_with_args(std::env::args_os()));
}
