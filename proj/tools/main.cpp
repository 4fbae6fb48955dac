#include <iostream>

#include "gnnlink_cli/cli.hpp"

int main(int argc, char** argv) {
  auto parsed = gnnlink::cli::parse_command_line(argc, argv, std::cout, std::cerr);
  if (parsed.exit_status >= 0) return parsed.exit_status;
  return gnnlink::cli::run_command(parsed.command, parsed.config, std::cerr);
}
