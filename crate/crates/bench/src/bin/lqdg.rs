fn main() {
    std::process::exit(lqdg_bench::cli::run(std::env::args_os()));
}
