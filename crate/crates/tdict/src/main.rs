fn main() {
    std::process::exit(tdict::cli::run(std::env::args_os()));
}
