fn main() {
    std::process::exit(bandforge::cli::main_with(std::env::args_os()));
}
