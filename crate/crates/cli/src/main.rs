fn main() {
    std::process::exit(smoothconf_cli::main_with_args(std::env::args_os()));
}
