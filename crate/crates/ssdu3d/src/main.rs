fn main() {
    std::process::exit(ssdu3d::cli::cli_main(std::env::args_os()));
}
