fn main() {
    ddks::cli::init_threads();
    std::process::exit(ddks::cli::run(std::env::args_os()));
}
