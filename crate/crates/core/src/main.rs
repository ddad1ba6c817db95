fn main() {
    std::process::exit(stokes_memory::cli::run_command(std::env::args_os()));
}
