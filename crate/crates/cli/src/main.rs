fn main() {
    std::process::exit(rds_floquet_cli::main_with(std::env::args_os()));
}
