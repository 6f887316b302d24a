fn main() {
    std::process::exit(plslam::cli::run(std::env::args_os()));
}
