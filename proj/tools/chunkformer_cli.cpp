// Copyright 2026 The chunkformer-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// chunkformer: command-line front end.
//
//   chunkformer transcribe --checkpoint model.cfkw a.wav b.wav
//   chunkformer encode --output-dir out/ a.wav
//   chunkformer selftest
//   chunkformer cost --durations 1,30,60,900,1800,3600 --context 128,64,128
//   chunkformer init --output model.cfkw
//   chunkformer fbank a.wav --output a.cfkf

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chunkformer/chunkformer.hpp"

namespace cf = chunkformer;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kTolerance = 1, kUsage = 2, kIo = 3, kConfig = 4 };

int exit_code(cf::ErrorKind kind) {
    switch (kind) {
    case cf::ErrorKind::usage: return kUsage;
    case cf::ErrorKind::io:
    case cf::ErrorKind::format:
    case cf::ErrorKind::empty_input: return kIo;
    case cf::ErrorKind::config:
    case cf::ErrorKind::checkpoint:
    case cf::ErrorKind::shape:
    case cf::ErrorKind::range: return kConfig;
    case cf::ErrorKind::scheduler: return kTolerance;
    }
    return kTolerance;
}

struct ModelFlags {
    std::string config_path;
    std::string checkpoint;
    std::string context;
    std::optional<std::uint64_t> seed;
    int budget = 16;
    std::string format = "auto";

    // `decoding` adds the flags that only matter when audio is run through the model.
    void add_to(CLI::App &cmd, bool decoding = true) {
        cmd.add_option("--config", config_path, "JSON config file");
        cmd.add_option("--context", context, "attention context \"l_att,c,r\" (overrides config)");
        if (!decoding) {
            cmd.add_option("--seed", seed, "weight-init seed");
            return;
        }
        cmd.add_option("--checkpoint", checkpoint, "CFKW checkpoint");
        cmd.add_option("--seed", seed, "weight-init seed when no checkpoint is given");
        cmd.add_option("--budget", budget, "chunk rows emitted per decode step")->check(CLI::PositiveNumber);
        cmd.add_option("--format", format, "input kind")->check(CLI::IsMember({"auto", "wav", "features"}));
    }

    cf::Config config() const {
        cf::Config cfg = config_path.empty() ? cf::Config{} : cf::load_config(config_path);
        if (!context.empty()) cfg.context = cf::parse_context(context);
        if (seed) cfg.model.seed = *seed;
        cf::validate_or_throw(cfg.model, cfg.context);
        return cfg;
    }

    cf::EncoderWeights weights(const cf::Config &cfg) const {
        if (!checkpoint.empty()) return cf::load_checkpoint(checkpoint, cfg.model);
        return cf::init_weights(cfg.model, cfg.model.seed);
    }
};

struct Input {
    std::string id;
    cf::FeatureMatrix features;
};

std::vector<Input> load_inputs(const std::vector<std::string> &paths, const std::string &format) {
    CF_CHECK(!paths.empty(), cf::ErrorKind::usage, "no input files given");
    std::vector<Input> inputs;
    std::set<std::string> ids;
    for (const auto &path : paths) {
        const fs::path p(path);
        const bool wav = format == "wav" || (format == "auto" && p.extension() == ".wav");
        Input in;
        in.id = p.stem().string();
        CF_CHECK(ids.insert(in.id).second, cf::ErrorKind::usage, "duplicate audio id '" + in.id + "'");
        in.features = wav ? cf::compute_fbank(cf::read_wav(path)) : cf::load_features(path, cf::ModelConfig::kMelBins);
        CF_CHECK(in.features.rows() >= 1, cf::ErrorKind::empty_input, path + ": no feature frames");
        inputs.push_back(std::move(in));
    }
    return inputs;
}

std::string span_text(const cf::Vocab &vocab, const cf::CtcHypothesis &hyp) {
    std::string out;
    for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(hyp.tokens[i]) + ":" + std::to_string(hyp.spans[i].first) + "-" +
               std::to_string(hyp.spans[i].second);
    }
    return out;
}

std::ostream &open_output(const std::string &path, std::ofstream &file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    CF_CHECK(file.good(), cf::ErrorKind::io, "cannot write " + path);
    return file;
}

std::vector<cf::Matrix<float>> feature_list(const std::vector<Input> &inputs) {
    std::vector<cf::Matrix<float>> f;
    for (const auto &in : inputs) f.push_back(in.features);
    return f;
}

int cmd_transcribe(const ModelFlags &flags, const std::vector<std::string> &paths, bool timestamps,
                   const std::string &output) {
    CF_CHECK(!flags.checkpoint.empty(), cf::ErrorKind::usage,
             "transcribe needs --checkpoint (random weights would only produce noise)");
    const auto inputs = load_inputs(paths, flags.format);
    const auto cfg = flags.config();
    const auto params = cf::ModelParams<float>::from(flags.weights(cfg));
    const auto features = feature_list(inputs);

    auto states = cf::feature_streams<float>(features, cfg.model);
    std::vector<cf::CtcHypothesis> hyps(inputs.size());
    cf::EncodeOptions opt;
    opt.budget = flags.budget;
    cf::run_streams<float>(params, cfg.context, states, cf::feature_source(params, cfg.context, features),
                           [&](std::size_t i, const cf::Matrix<float> &h, cf::StreamState<float> &st) {
                               cf::greedy_decode(cf::project_logits(h, params.ctc), st.ctc_carry, hyps[i]);
                           },
                           opt);

    std::ofstream file;
    std::ostream &out = open_output(output, file);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out << inputs[i].id << '\t' << params.vocab.detokenize(hyps[i].tokens);
        if (timestamps) out << '\t' << span_text(params.vocab, hyps[i]);
        out << '\n';
    }
    return kOk;
}

int cmd_encode(const ModelFlags &flags, const std::vector<std::string> &paths, const std::string &output_dir) {
    const auto inputs = load_inputs(paths, flags.format);
    const auto cfg = flags.config();
    const auto params = cf::ModelParams<float>::from(flags.weights(cfg));
    cf::EncodeOptions opt;
    opt.budget = flags.budget;
    const auto hidden = cf::encode_full<float>(params, cfg.context, feature_list(inputs), opt);
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    CF_CHECK(!ec, cf::ErrorKind::io, "cannot create " + output_dir);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto path = (fs::path(output_dir) / (inputs[i].id + ".cfkf")).string();
        cf::save_features(path, hidden[i]);
        std::cout << inputs[i].id << '\t' << hidden[i].rows() << " frames\t" << path << '\n';
    }
    return kOk;
}

int cmd_selftest(std::uint64_t seed, bool inject) {
    cf::SelftestOptions opt;
    opt.seed = seed;
    opt.inject_cache_off_by_one = inject;
    bool ok = true;
    for (const auto &s : cf::run_selftest(opt)) {
        std::printf("%-13s %s  max_rel=%.3e  mean_rel=%.3e  tol=%.0e  (%s)\n", s.name.c_str(),
                    s.passed ? "PASS" : "FAIL", s.report.max_rel_error, s.report.mean_rel_error, s.tolerance,
                    s.detail.c_str());
        if (!s.passed) {
            if (ok) std::printf("  first divergent element: %ld\n", s.report.first_divergent);
            ok = false;
        }
    }
    return ok ? kOk : kTolerance;
}

std::vector<double> parse_durations(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            CF_CHECK(used == item.size(), cf::ErrorKind::usage, "bad duration '" + item + "'");
        } catch (const std::logic_error &) {
            throw cf::Error(cf::ErrorKind::usage, "bad duration '" + item + "'");
        }
        CF_CHECK(out.back() > 0, cf::ErrorKind::usage, "durations must be positive");
    }
    CF_CHECK(!out.empty(), cf::ErrorKind::usage, "--durations is empty");
    return out;
}

int cmd_cost(const std::string &config_path, const std::string &context, const std::string &durations,
             const std::string &csv) {
    cf::Config cfg;
    cfg.model = cf::ModelConfig::large();
    cfg.context = {128, 64, 128};
    if (!config_path.empty()) cfg = cf::load_config(config_path);
    if (!context.empty()) cfg.context = cf::parse_context(context);
    const auto rep = cf::batch_cost(parse_durations(durations), cfg.context, cfg.model);
    std::cout << cf::format_report(rep);
    if (!csv.empty()) {
        std::ofstream f(csv);
        CF_CHECK(f.good(), cf::ErrorKind::io, "cannot write " + csv);
        f << cf::format_csv(rep);
    }
    return kOk;
}

int cmd_init(const ModelFlags &flags, const std::string &output) {
    const auto cfg = flags.config();
    cf::save_checkpoint(output, cf::init_weights(cfg.model, cfg.model.seed));
    std::cout << "wrote " << output << " (seed " << cfg.model.seed << ")\n";
    return kOk;
}

int cmd_fbank(const std::string &input, const std::string &output) {
    const auto features = cf::compute_fbank(cf::read_wav(input));
    cf::save_features(output, features);
    std::cout << input << '\t' << features.rows() << " frames\n";
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"ChunkFormer streaming ASR encoder"};
    app.require_subcommand(1);

    ModelFlags model;
    std::vector<std::string> inputs;
    std::string output, output_dir = "encoded", config_path, context, durations = "1,30,60,900,1800,3600", csv;
    bool timestamps = false, inject = false;
    std::uint64_t seed = 1234;

    auto *transcribe = app.add_subcommand("transcribe", "decode audio to text with masked-batch endless decoding");
    model.add_to(*transcribe);
    transcribe->add_option("inputs", inputs, "WAV or feature files");
    transcribe->add_flag("--timestamps", timestamps, "append token frame spans");
    transcribe->add_option("--output", output, "transcript file (default stdout)");

    auto *encode = app.add_subcommand("encode", "write encoder hidden frames per input");
    model.add_to(*encode);
    encode->add_option("inputs", inputs, "WAV or feature files");
    encode->add_option("--output-dir", output_dir, "directory for <id>.cfkf files");

    auto *selftest = app.add_subcommand("selftest", "run the oracle equivalence suites on seeded weights");
    selftest->add_option("--seed", seed, "weight and input seed");
    selftest->add_flag("--inject-cache-off-by-one", inject, "break the attention cache (must fail)");

    auto *cost = app.add_subcommand("cost", "naive vs masked batching FLOP accounting");
    cost->add_option("--config", config_path, "JSON config (default: full-size model)");
    cost->add_option("--context", context, "\"l_att,c,r\" (default 128,64,128)");
    cost->add_option("--durations", durations, "comma-separated seconds");
    cost->add_option("--csv", csv, "also write CSV here");

    auto *init = app.add_subcommand("init", "write a seeded random checkpoint");
    model.add_to(*init, false);
    init->add_option("--output", output, "checkpoint path")->required();

    std::string wav;
    auto *fbank = app.add_subcommand("fbank", "compute log-mel features of a WAV file");
    fbank->add_option("input", wav, "WAV file")->required();
    fbank->add_option("--output", output, "feature file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*transcribe) return cmd_transcribe(model, inputs, timestamps, output);
        if (*encode) return cmd_encode(model, inputs, output_dir);
        if (*selftest) return cmd_selftest(seed, inject);
        if (*cost) return cmd_cost(config_path, context, durations, csv);
        if (*init) return cmd_init(model, output);
        if (*fbank) return cmd_fbank(wav, output);
    } catch (const cf::Error &e) {
        std::cerr << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kTolerance;
    }
    return kUsage;
}
