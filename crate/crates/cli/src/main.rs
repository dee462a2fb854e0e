fn main() {
    std::process::exit(asymfilter_cli::run(std::env::args_os()));
}
