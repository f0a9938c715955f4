fn main() {
    std::process::exit(holorenorm_cli::execute(std::env::args_os()));
}
