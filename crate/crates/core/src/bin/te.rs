fn main() {
    std::process::exit(terminal_embed::cli::main_with_args(std::env::args_os()));
}
