fn main() {
    std::process::exit(wozloc::cli::run(std::env::args_os()));
}
