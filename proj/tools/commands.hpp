#pragma once

#include <CLI11.hpp>

namespace intertext::cli {

void add_ingest(CLI::App& app);
void add_stats(CLI::App& app);
void add_match(CLI::App& app);
void add_index(CLI::App& app);
void add_detect(CLI::App& app);
void add_evaluate(CLI::App& app);
void add_sample_negatives(CLI::App& app);
void add_export_pairs(CLI::App& app);
void add_serve(CLI::App& app);
void add_synth(CLI::App& app);

}  // namespace intertext::cli
