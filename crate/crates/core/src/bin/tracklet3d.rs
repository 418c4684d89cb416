fn main() {
    std::process::exit(tracklet3d::cli::run(std::env::args_os()));
}
