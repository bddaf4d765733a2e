fn main() {
    std::process::exit(dtorus::cli::run(std::env::args_os()));
}
