fn main() {
    std::process::exit(ringwalk_cli::run(std::env::args_os()));
}
