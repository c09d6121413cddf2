fn main() {
    std::process::exit(fracperc_cli::run(std::env::args_os()));
}
