#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

#include <intertext/error.hpp>

#include "commands.hpp"

namespace {

// 1 for problems with the input or the invocation, 2 for everything that
// went wrong while running.
int exit_code_for(intertext::ErrorCode code) {
  using intertext::ErrorCode;
  switch (code) {
    case ErrorCode::schema:
    case ErrorCode::validation:
    case ErrorCode::empty_document:
    case ErrorCode::configuration:
    case ErrorCode::not_found:
    case ErrorCode::conflict:
    case ErrorCode::undefined_metric: return 1;
    case ErrorCode::transport:
    case ErrorCode::provider_contract:
    case ErrorCode::io: return 2;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intertext: intertextual link detection and benchmarking"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  auto logger = spdlog::stderr_color_mt("intertext");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  app.add_flag_function(
      "-v,--verbose",
      [](std::int64_t n) { spdlog::set_level(n >= 2 ? spdlog::level::trace : spdlog::level::debug); },
      "More logging (repeatable)");
  app.add_flag_function(
      "-q,--quiet", [](std::int64_t) { spdlog::set_level(spdlog::level::err); }, "Only log errors");

  intertext::cli::add_ingest(app);
  intertext::cli::add_stats(app);
  intertext::cli::add_match(app);
  intertext::cli::add_index(app);
  intertext::cli::add_detect(app);
  intertext::cli::add_evaluate(app);
  intertext::cli::add_sample_negatives(app);
  intertext::cli::add_export_pairs(app);
  intertext::cli::add_serve(app);
  intertext::cli::add_synth(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const intertext::Error& e) {
    spdlog::error("{}: {}", intertext::to_string(e.code()), e.what());
    for (const auto& f : e.fields()) spdlog::error("  {}: {}", f.field, f.message);
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
