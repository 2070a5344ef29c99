fn main() {
    std::process::exit(snrloss::cli::run(std::env::args_os()));
}
