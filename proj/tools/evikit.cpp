#include <evikit/cli.hpp>

int main(int argc, char** argv)
{
  return evikit::cli::run(argc, argv);
}
