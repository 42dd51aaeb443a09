fn main() {
    std::process::exit(recurrence_core::cli::run(std::env::args_os()));
}
