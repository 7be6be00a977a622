fn main() {
    std::process::exit(freightcon_cli::run(std::env::args_os()));
}
