#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/harness.hpp"
#include "memprobe/io.hpp"

namespace {

using memprobe::RunConfig;

struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& flags) {
    cmd.add_option("--config", flags.config_file, "Flat key = value config file");
    for (const auto& key : memprobe::config_keys()) {
        cmd.add_option_function<std::string>(
            "--" + key, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
            "Override config key " + key);
    }
}

RunConfig resolve(const ConfigFlags& flags) {
    RunConfig config;
    if (!flags.config_file.empty()) config = memprobe::load_config_file(flags.config_file);
    for (const auto& [key, value] : flags.overrides) config.set(key, value);
    config.validate();
    return config;
}

void print_cells(const std::vector<memprobe::GridCell>& cells) {
    for (const auto& c : cells) {
        std::cout << c.config_id() << "  n=" << c.n_questions << "  accuracy=" << c.accuracy
                  << "  f1=" << c.token_f1 << "  precision@k=" << c.precision_at_k << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory write/retrieval evaluation harness"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    ConfigFlags build_flags, eval_flags, probe_flags, report_flags, validate_flags;
    auto* build = app.add_subcommand("build", "Build memory stores for every conversation and strategy");
    add_config_flags(*build, build_flags);

    auto* eval = app.add_subcommand("eval", "Answer, probe and report over the configured grid");
    add_config_flags(*eval, eval_flags);

    auto* run = app.add_subcommand("run", "build followed by eval");
    ConfigFlags run_flags;
    add_config_flags(*run, run_flags);

    auto* probe = app.add_subcommand("probe", "Recompute probes over stored outcomes");
    add_config_flags(*probe, probe_flags);

    auto* report = app.add_subcommand("report", "Re-aggregate stored results into the report");
    add_config_flags(*report, report_flags);

    auto* validate = app.add_subcommand("validate-judge", "Compare judge labels with human labels");
    add_config_flags(*validate, validate_flags);
    std::string labels_path;
    std::string cell;
    validate->add_option("--labels", labels_path, "Human label CSV")->required();
    validate->add_option("--cell", cell, "Config id whose probe records supply the judge labels");

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
    memprobe::synthetic::Options synth_options;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output path")->required();
    synth->add_option("--seed", synth_options.seed, "Generator seed");
    synth->add_option("--sessions", synth_options.n_sessions, "Sessions per conversation");
    synth->add_option("--turns", synth_options.turns_per_session, "Turns per session");
    synth->add_option("--questions", synth_options.n_questions, "Questions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));
        spdlog::set_default_logger(spdlog::stderr_color_mt("memprobe"));
        spdlog::set_level(spdlog::level::from_str(log_level));

        if (*build) {
            memprobe::Harness harness(resolve(build_flags));
            for (const auto& s : harness.build()) {
                std::cout << s.conversation_id << " " << memprobe::to_string(s.strategy) << ": " << s.entries
                          << " entries, " << s.write_llm_calls << " write calls" << (s.reused ? " (reused)" : "")
                          << "\n";
            }
        } else if (*eval) {
            memprobe::Harness harness(resolve(eval_flags));
            print_cells(harness.eval().cells);
        } else if (*run) {
            memprobe::Harness harness(resolve(run_flags));
            harness.build();
            print_cells(harness.eval().cells);
        } else if (*probe) {
            memprobe::Harness harness(resolve(probe_flags));
            print_cells(harness.probe().cells);
        } else if (*report) {
            memprobe::Harness harness(resolve(report_flags));
            print_cells(harness.report());
        } else if (*validate) {
            memprobe::Harness harness(resolve(validate_flags));
            auto result = harness.validate_judge(labels_path, cell.empty() ? std::nullopt : std::optional(cell));
            std::cout << result.dump(2) << "\n";
        } else if (*synth) {
            memprobe::write_synthetic_corpus(synth_options, synth_out);
            std::cout << "wrote " << synth_out << "\n";
        }
    } catch (const memprobe::Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
