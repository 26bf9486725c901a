#include <iostream>
#include <stdexcept>

#include <snore/cli.hpp>

int main(int argc, char** argv)
{
    using snore::cli::ExitCode;
    snore::cli::JobSpec job;
    try {
        job = snore::cli::parse_job(argc, argv);
    } catch (const snore::cli::HelpRequested& h) {
        std::cout << h.what();
        return 0;
    } catch (const snore::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Io);
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Usage);
    }
    return static_cast<int>(snore::cli::execute(job));
}
