fn main() {
    std::process::exit(cgankd_cli::main_with(std::env::args_os()));
}
