#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "setrec/setrec.hpp"

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const setrec::ConfigError*>(&e)) return 1;
    if (dynamic_cast<const setrec::DataError*>(&e)) return 2;
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"itemset completion experiments: corpus tools, dataset statistics and model sweeps"};
    app.require_subcommand(1);

    std::string corpus_path;
    CLI::App* validate = app.add_subcommand("validate", "check a JSONL corpus and report field availability");
    validate->add_option("corpus", corpus_path, "corpus file (JSONL)")->required();

    std::string config_path;
    std::string flag_corpus, flag_out, flag_only, flag_mask, flag_pruning, flag_dataset;
    std::optional<int> flag_jobs, flag_seed, flag_runs;

    CLI::App* stats = app.add_subcommand("stats", "dataset characteristics per pruning threshold");
    stats->add_option("--config", config_path, "experiment config file");
    stats->add_option("--corpus", flag_corpus, "corpus file (overrides config)");
    stats->add_option("--pruning", flag_pruning, "comma-separated pruning thresholds");
    stats->add_option("--out", flag_out, "output directory");
    stats->add_option("--dataset-name", flag_dataset, "name column value");

    CLI::App* run = app.add_subcommand("run", "execute the experiment sweep from a config file");
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--only", flag_only, "restrict to one cell: model:k:f:run");
    run->add_option("--jobs", flag_jobs, "parallel sweep workers");
    run->add_option("--seed", flag_seed, "base seed (overrides config)");
    run->add_option("--runs", flag_runs, "runs per cell (overrides config)");
    run->add_option("--mask-observed", flag_mask, "on|off: exclude given items from the ranking");
    run->add_option("--out", flag_out, "output directory (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return setrec::cmd_validate(corpus_path, std::cout);

        setrec::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = setrec::parse_config_file(config_path);
        if (!flag_corpus.empty()) cfg.corpus = flag_corpus;
        if (!flag_out.empty()) cfg.out = flag_out;
        if (!flag_pruning.empty()) setrec::apply_config_entry(cfg, "pruning", flag_pruning);
        if (!flag_dataset.empty()) cfg.dataset_name = flag_dataset;
        if (!flag_mask.empty()) setrec::apply_config_entry(cfg, "mask_observed", flag_mask);
        if (flag_jobs) cfg.jobs = *flag_jobs;
        if (flag_seed) cfg.seed = static_cast<std::uint64_t>(*flag_seed);
        if (flag_runs) cfg.runs = *flag_runs;
        if (!flag_only.empty()) cfg.only = setrec::parse_only(flag_only);

        if (stats->parsed()) return setrec::cmd_stats(cfg, std::cout);
        return setrec::cmd_run(cfg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
