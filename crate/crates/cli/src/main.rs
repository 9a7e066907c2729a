fn main() {
    std::process::exit(apprentice_cli::execute(std::env::args_os()));
}
