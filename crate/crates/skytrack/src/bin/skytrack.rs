fn main() {
    // Exit quietly when stdout is a closed pipe (`skytrack sweep ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(skytrack::cli::main_with(std::env::args_os()));
}
