fn main() {
    std::process::exit(turbojet_fdi::cli::run(std::env::args_os()));
}
