fn main() {
    std::process::exit(anisoag_cli::run(std::env::args_os()));
}
