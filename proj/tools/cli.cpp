// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastsae/actstream.hpp"
#include "fastsae/corpus.hpp"
#include "fastsae/error.hpp"
#include "fastsae/eval.hpp"
#include "fastsae/interp.hpp"
#include "fastsae/kernels.hpp"
#include "fastsae/sae.hpp"
#include "fastsae/schedule.hpp"
#include "fastsae/steer.hpp"
#include "fastsae/toy_producer.hpp"
#include "fastsae/train.hpp"
#include "manifest.hpp"

namespace fastsae::cli {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, mode);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    return is;
}

std::vector<std::uint32_t> parse_u32_list(const std::string& text, const char* what) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || v > std::numeric_limits<std::uint32_t>::max()) {
            throw UsageError(std::string(what) + ": '" + item + "' is not a token id");
        }
        out.push_back(static_cast<std::uint32_t>(v));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !std::isfinite(v)) throw UsageError("'" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// --- gen-acts -----------------------------------------------------------------------

struct GenActsArgs {
    fs::path corpus, vocab, out;
    std::string mode = "fast";
    std::size_t context_size = 2048;
    std::size_t truncation = 8192;
    std::uint64_t seed = 42;
    std::size_t d_in = 64;
};

void cmd_gen_acts(const GenActsArgs& a, std::ostream& out) {
    const Vocabulary vocab = Vocabulary::load(a.vocab);
    const ChatTemplate tmpl = ChatTemplate::chatml(vocab);
    const auto dialogues = read_dialogues(a.corpus);

    std::vector<TokenSequence> seqs;
    seqs.reserve(dialogues.size());
    for (std::size_t i = 0; i < dialogues.size(); ++i) seqs.push_back(apply_chat_template(dialogues[i], tmpl, vocab, i));

    ScheduleConfig sc;
    sc.mode = parse_schedule_mode(a.mode);
    sc.context_size = a.context_size;
    sc.truncation = a.truncation;
    sc.separator_id = vocab.require("<|endoftext|>");
    sc.validate();

    ProducerSource src(make_scheduler(from_vector(std::move(seqs)), sc), ToyProducer(a.seed, a.d_in));
    auto os = open_out(a.out, std::ios::binary);
    StreamWriter writer(os, static_cast<std::uint32_t>(a.d_in));
    ActivationBatch chunk(a.d_in);
    while (src.pull(chunk, 4096) > 0) {
        writer.write(chunk);
        chunk.clear();
    }
    os.close();
    if (!os) throw IoError("write failed: " + a.out.string());

    RunManifest m;
    m.command = "gen-acts";
    m.config = {{"mode", std::string(schedule_mode_name(sc.mode))},
                {"context_size", std::to_string(sc.context_size)},
                {"truncation", std::to_string(sc.truncation)},
                {"d_in", std::to_string(a.d_in)}};
    m.seeds = {{"producer", a.seed}};
    m.inputs = {a.corpus, a.vocab};
    m.outputs = {a.out};
    m.write();
    out << "wrote " << writer.records_written() << " records (" << dialogues.size() << " dialogues, mode "
        << schedule_mode_name(sc.mode) << ") to " << a.out.string() << '\n';
}

// --- dedup --------------------------------------------------------------------------

struct DedupArgs {
    fs::path in, out;
    std::size_t n = 20;
};

void cmd_dedup(const DedupArgs& a, std::ostream& out) {
    if (a.n < 1) throw UsageError("--n must be >= 1");
    const auto data = read_dialogues(a.in);
    const auto kept = dedup(data, NgramConfig{a.n});
    auto os = open_out(a.out);
    write_dialogues(os, kept);
    os.close();

    RunManifest m;
    m.command = "dedup";
    m.config = {{"n", std::to_string(a.n)}};
    m.inputs = {a.in};
    m.outputs = {a.out};
    m.write();
    out << "kept " << kept.size() << " of " << data.size() << " dialogues\n";
}

// --- train --------------------------------------------------------------------------

struct TrainArgs {
    fs::path stream, out, metrics, config;
    std::vector<std::string> sets;
    std::string preset = "full";
    std::string arch;
    std::optional<std::uint64_t> seed, total_tokens;
    std::optional<double> lr;
    bool serial = false;
};

TrainConfig resolve_config(const TrainArgs& a) {
    std::map<std::string, std::string> kv;
    if (!a.config.empty()) kv = read_kv_file(a.config);
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!a.arch.empty()) kv["arch"] = a.arch;
    if (a.seed) kv["seed"] = std::to_string(*a.seed);
    if (a.total_tokens) kv["total_train_tokens"] = std::to_string(*a.total_tokens);
    if (a.lr) kv["lr"] = fmt("%.17g", *a.lr);

    const Arch arch = kv.count("arch") ? parse_arch(kv.at("arch")) : Arch::jumprelu;
    TrainConfig cfg;
    if (a.preset == "full") {
        cfg = TrainConfig::full_scale(arch);
    } else if (a.preset == "desk") {
        std::uint64_t tokens = 200000;
        if (auto it = kv.find("total_train_tokens"); it != kv.end()) tokens = std::stoull(it->second);
        cfg = TrainConfig::desk_scale(arch, tokens);
    } else {
        throw UsageError("--preset must be full or desk");
    }
    cfg.apply(kv);
    cfg.validate();
    return cfg;
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
    const TrainConfig cfg = resolve_config(a);
    const fs::path metrics = a.metrics.empty() ? fs::path(a.out.string() + ".metrics.jsonl") : a.metrics;

    StreamFileReader src(a.stream);
    auto log = open_out(metrics);
    const TrainResult res = train(cfg, src, [&](const StepMetrics& m) { write_metrics_line(log, m); },
                                  a.serial ? Exec::serial : Exec::parallel);
    log.close();
    save_checkpoint(a.out, res.params);

    RunManifest m;
    m.command = "train";
    m.config = cfg.to_map();
    m.config["preset"] = a.preset;
    m.seeds = {{"seed", cfg.seed}};
    m.inputs = {a.stream};
    if (!a.config.empty()) m.inputs.push_back(a.config);
    m.outputs = {a.out, metrics};
    m.write();

    out << "trained " << arch_name(cfg.arch) << " SAE " << res.params.d_in << "x" << res.params.d_sae << ": "
        << res.steps << " steps, " << res.tokens_consumed << " tokens, geometric median "
        << (res.gm_converged ? "converged" : "not converged") << " after " << res.gm_iterations << " iterations\n";
    if (!res.log.empty()) {
        const auto& last = res.log.back();
        out << "final step " << last.step << ": mse_part " << fmt("%.6g", last.mse_part) << ", sparsity_part "
            << fmt("%.6g", last.sparsity_part) << ", dead " << last.dead_count << '\n';
    }
}

// --- eval ---------------------------------------------------------------------------

struct EvalArgs {
    fs::path checkpoint, out;
    std::vector<fs::path> streams;
    std::string special_ids;
    std::string format = "tsv";
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.format != "tsv" && a.format != "jsonl") throw UsageError("--format must be tsv or jsonl");
    const SaeParams p = load_checkpoint(a.checkpoint);
    EvalOptions opts;
    if (!a.special_ids.empty()) {
        const auto ids = parse_u32_list(a.special_ids, "--special-ids");
        opts.special_ids = std::set<TokenId>(ids.begin(), ids.end());
    }

    std::ostringstream table;
    if (a.format == "tsv") table << "stream\tmetric\tmse\tlog2_mse\tsequences\ttokens\n";
    auto row = [&](const fs::path& s, const char* metric, const std::optional<MseResult>& r) {
        if (a.format == "tsv") {
            table << s.filename().string() << '\t' << metric << '\t';
            if (r) {
                table << fmt("%.9g", r->raw) << '\t' << format_log2(r->log2) << '\t' << r->sequences << '\t'
                      << r->tokens << '\n';
            } else {
                table << "n/a\tn/a\t0\t0\n";
            }
        } else {
            nlohmann::ordered_json j;
            j["stream"] = s.filename().string();
            j["metric"] = metric;
            if (r) {
                j["mse"] = r->raw;
                j["log2_mse"] = format_log2(r->log2);
                j["sequences"] = r->sequences;
                j["tokens"] = r->tokens;
            } else {
                j["mse"] = nullptr;
            }
            table << j.dump() << '\n';
        }
    };
    for (const auto& s : a.streams) {
        StreamFileReader src(s);
        const EvalReport rep = evaluate(p, src, opts);
        row(s, "MSE", rep.mse);
        row(s, "MSE_st", rep.mse_special);
    }

    out << table.str();
    if (!a.out.empty()) {
        auto os = open_out(a.out);
        os << table.str();
        os.close();
        RunManifest m;
        m.command = "eval";
        m.config = {{"format", a.format}, {"special_ids", a.special_ids}};
        m.inputs = {a.checkpoint};
        m.inputs.insert(m.inputs.end(), a.streams.begin(), a.streams.end());
        m.outputs = {a.out};
        m.write();
    }
}

// --- topk ---------------------------------------------------------------------------

struct TopkArgs {
    fs::path checkpoint, stream, vocab, out;
    std::size_t top_n = 5;
    std::size_t sample = 0;
    std::uint64_t seed = 42;
    std::string token_stats;
};

void cmd_topk(const TopkArgs& a, std::ostream& out) {
    const SaeParams p = load_checkpoint(a.checkpoint);
    StreamFileReader src(a.stream);
    const auto data = read_sequences(src);
    std::optional<Vocabulary> vocab;
    if (!a.vocab.empty()) vocab = Vocabulary::load(a.vocab);

    if (!a.token_stats.empty()) {
        TokenId token = 0;
        if (vocab && vocab->contains(a.token_stats)) {
            token = vocab->require(a.token_stats);
        } else {
            token = parse_u32_list(a.token_stats, "--token-stats").at(0);
        }
        out << "feature\tavg_max_activation\n";
        for (const auto& f : avg_top_max_activation(p, data, token, a.top_n)) {
            out << f.feature << '\t' << fmt("%.6f", f.average) << '\n';
        }
        return;
    }

    if (a.out.empty()) throw UsageError("topk needs --out unless --token-stats is given");
    auto all = all_feature_contexts(p, data, a.top_n);
    std::vector<FeatureContext> chosen;
    if (a.sample > 0) {
        for (std::size_t k : select_features(all, a.sample, a.seed)) chosen.push_back(std::move(all[k]));
    } else {
        for (auto& c : all) {
            if (c.eligible()) chosen.push_back(std::move(c));
        }
    }
    if (vocab) render_words(chosen, *vocab);
    auto os = open_out(a.out);
    write_feature_contexts(os, chosen);
    os.close();

    RunManifest m;
    m.command = "topk";
    m.config = {{"top_n", std::to_string(a.top_n)}, {"sample", std::to_string(a.sample)}};
    m.seeds = {{"sample", a.seed}};
    m.inputs = {a.checkpoint, a.stream};
    if (vocab) m.inputs.push_back(a.vocab);
    m.outputs = {a.out};
    m.write();
    out << "wrote contexts for " << chosen.size() << " features to " << a.out.string() << '\n';
}

// --- interp -------------------------------------------------------------------------

struct InterpArgs {
    fs::path contexts, out, dist, audit;
    std::string endpoint = HttpChatConfig{}.endpoint;
    std::string api_key_env = HttpChatConfig{}.api_key_env;
    std::string model = ScoreOptions{}.model;
    double temperature = 0.0;
    int parallel = 1;
    int retries = 1;
    std::string mock;
};

std::size_t feature_from_prompt(const std::string& user) {
    static const std::string lead = "context of feature ";
    const auto at = user.find(lead);
    if (at == std::string::npos) return 0;
    return std::stoul(user.substr(at + lead.size()));
}

std::unique_ptr<ChatClient> make_mock(const std::string& spec) {
    if (spec == "cycle") {
        return std::make_unique<MockChatClient>([](const ChatRequest& r) {
            const std::size_t k = feature_from_prompt(r.user);
            return format_verdict({static_cast<int>(k % 5) + 1, "feature " + std::to_string(k)});
        });
    }
    if (spec.rfind("const:", 0) == 0) {
        const int score = std::stoi(spec.substr(6));
        return std::make_unique<MockChatClient>([score](const ChatRequest& r) {
            return format_verdict({score, "feature " + std::to_string(feature_from_prompt(r.user))});
        });
    }
    if (spec.rfind("script:", 0) == 0) {
        auto is = open_in(spec.substr(7));
        auto lines = std::make_shared<std::vector<std::string>>();
        for (std::string line; std::getline(is, line);) lines->push_back(line);
        if (lines->empty()) throw UsageError("mock script " + spec.substr(7) + " is empty");
        auto next = std::make_shared<std::atomic<std::size_t>>(0);
        return std::make_unique<MockChatClient>([lines, next](const ChatRequest&) {
            return (*lines)[(*next)++ % lines->size()];
        });
    }
    throw UsageError("--mock must be cycle, const:N or script:FILE");
}

void cmd_interp(const InterpArgs& a, std::ostream& out) {
    std::vector<FeatureContext> features;
    {
        auto is = open_in(a.contexts);
        features = read_feature_contexts(is);
    }
    std::unique_ptr<ChatClient> client =
        a.mock.empty() ? make_http_chat_client({a.endpoint, a.api_key_env}) : make_mock(a.mock);

    std::optional<std::ofstream> audit;
    ScoreOptions opts;
    opts.model = a.model;
    opts.temperature = a.temperature;
    opts.parallelism = a.parallel;
    opts.retries = a.retries;
    if (!a.audit.empty()) {
        audit = open_out(a.audit);
        opts.audit = &*audit;
    }
    const ScoreReport rep = score_features(*client, features, opts);

    const fs::path dist = a.dist.empty() ? fs::path(a.out.string() + ".dist.tsv") : a.dist;
    {
        auto os = open_out(a.out);
        write_score_records(os, rep);
        auto ds = open_out(dist);
        write_score_distribution(ds, rep);
    }
    if (audit) audit->close();

    RunManifest m;
    m.command = "interp";
    m.config = {{"model", a.model},
                {"temperature", fmt("%.17g", a.temperature)},
                {"endpoint", a.mock.empty() ? a.endpoint : "mock:" + a.mock}};
    m.inputs = {a.contexts};
    m.outputs = {a.out, dist};
    if (audit) m.outputs.push_back(a.audit);
    m.write();
    write_score_distribution(out, rep);
}

// --- steer --------------------------------------------------------------------------

struct SteerArgs {
    fs::path checkpoint, export_path, stream, out;
    std::size_t feature = 0;
    bool sweep = false;
    std::string coefficients;
    std::size_t row = 0;
};

void cmd_steer(const SteerArgs& a, std::ostream& out) {
    const SaeParams p = load_checkpoint(a.checkpoint);
    if (a.feature >= p.d_sae) {
        throw UsageError("--feature " + std::to_string(a.feature) + " out of range (d_sae " + std::to_string(p.d_sae) + ")");
    }
    if (a.export_path.empty() && !a.sweep) throw UsageError("steer needs --export and/or --sweep");

    std::vector<fs::path> outputs;
    if (!a.export_path.empty()) {
        export_steering_vector(p, a.feature, a.export_path);
        outputs.push_back(a.export_path);
        out << "exported feature " << a.feature << " direction to " << a.export_path.string() << '\n';
    }
    if (a.sweep) {
        std::vector<double> coeffs(kDefaultSweep.begin(), kDefaultSweep.end());
        if (!a.coefficients.empty()) coeffs = parse_double_list(a.coefficients);

        std::vector<double> z(p.d_in, 0.0);
        if (!a.stream.empty()) {
            StreamFileReader src(a.stream);
            std::optional<ActivationRecord> rec;
            for (std::size_t i = 0; i <= a.row; ++i) {
                rec = src.next();
                if (!rec) throw UsageError("--row " + std::to_string(a.row) + " is past the end of the stream");
            }
            if (rec->activation.size() != p.d_in) throw FormatError("stream d_in does not match the checkpoint");
            z.assign(rec->activation.begin(), rec->activation.end());
        }
        const auto dk = p.dec_row(a.feature);
        double dk_norm = 0;
        for (float v : dk) dk_norm += static_cast<double>(v) * v;
        dk_norm = std::sqrt(dk_norm);

        std::ostringstream table;
        table << "alpha\tshift_norm\texpected_norm\tsteered_norm\n";
        const auto steered = sweep(z, a.feature, coeffs, p);
        for (std::size_t c = 0; c < coeffs.size(); ++c) {
            double shift = 0, norm = 0;
            for (std::size_t j = 0; j < p.d_in; ++j) {
                shift += (steered[c][j] - z[j]) * (steered[c][j] - z[j]);
                norm += steered[c][j] * steered[c][j];
            }
            table << fmt("%g", coeffs[c]) << '\t' << fmt("%.9f", std::sqrt(shift)) << '\t'
                  << fmt("%.9f", std::abs(coeffs[c]) * dk_norm) << '\t' << fmt("%.9f", std::sqrt(norm)) << '\n';
        }
        out << table.str();
        if (!a.out.empty()) {
            auto os = open_out(a.out);
            os << table.str();
            outputs.push_back(a.out);
        }
    }
    if (!outputs.empty()) {
        RunManifest m;
        m.command = "steer";
        m.config = {{"feature", std::to_string(a.feature)}, {"coefficients", a.coefficients}};
        m.inputs = {a.checkpoint};
        if (!a.stream.empty()) m.inputs.push_back(a.stream);
        m.outputs = outputs;
        m.write();
    }
}

// --- inspect ------------------------------------------------------------------------

void inspect_stream(const fs::path& path, std::ostream& out) {
    StreamFileReader src(path);
    std::uint64_t records = 0, special = 0, units = 0;
    std::size_t min_len = 0, max_len = 0, run = 0;
    std::optional<std::uint64_t> current;
    auto close_unit = [&] {
        if (!current) return;
        min_len = units == 0 ? run : std::min(min_len, run);
        max_len = std::max(max_len, run);
        ++units;
    };
    while (auto rec = src.next()) {
        ++records;
        special += rec->meta.is_special;
        if (!current || *current != rec->meta.instance_id) {
            close_unit();
            current = rec->meta.instance_id;
            run = 0;
        }
        ++run;
    }
    close_unit();
    out << "kind: activation-stream\nversion: " << src.header().version << "\nd_in: " << src.header().d_in
        << "\nencoding: f32\nrecords: " << records << "\nspecial_records: " << special << "\nunits: " << units
        << "\nunit_length_min: " << min_len << "\nunit_length_max: " << max_len << '\n';
}

void inspect_checkpoint(const fs::path& path, std::ostream& out) {
    const SaeParams p = load_checkpoint(path);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        double n = 0;
        for (float v : p.dec_row(k)) n += static_cast<double>(v) * v;
        lo = std::min(lo, std::sqrt(n));
        hi = std::max(hi, std::sqrt(n));
    }
    out << "kind: checkpoint\narch: " << arch_name(p.arch) << "\nd_in: " << p.d_in << "\nd_sae: " << p.d_sae
        << "\ndecoder_norm_min: " << fmt("%.9f", lo) << "\ndecoder_norm_max: " << fmt("%.9f", hi) << '\n';
    if (!p.threshold.empty()) {
        const auto [tmin, tmax] = std::minmax_element(p.threshold.begin(), p.threshold.end());
        out << "threshold_min: " << fmt("%.9g", *tmin) << "\nthreshold_max: " << fmt("%.9g", *tmax) << '\n';
    }
}

void cmd_inspect(const fs::path& path, std::ostream& out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4] = {};
    is.read(magic, 4);
    const std::string tag(magic, static_cast<std::size_t>(is.gcount()));
    is.close();
    if (tag == "SAEA") return inspect_stream(path, out);
    if (tag == "SAEC") return inspect_checkpoint(path, out);
    if (tag == "SAES") {
        const SteeringVector v = import_steering_vector(path);
        double n = 0;
        for (float x : v.direction) n += static_cast<double>(x) * x;
        out << "kind: steering-vector\nfeature: " << v.feature << "\nd_in: " << v.direction.size()
            << "\nnorm: " << fmt("%.9f", std::sqrt(n)) << '\n';
        return;
    }
    if (!tag.empty() && tag[0] == '{') {
        auto in = open_in(path);
        std::size_t lines = 0;
        nlohmann::json first;
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            if (lines++ == 0) {
                first = nlohmann::json::parse(line, nullptr, false);
                if (first.is_discarded()) {
                    // pretty-printed single document, e.g. a run manifest
                    in.close();
                    auto all = open_in(path);
                    first = nlohmann::json::parse(all, nullptr, false);
                    if (first.is_discarded()) throw FormatError(path.string() + " is not JSON or JSON lines");
                    out << "kind: json\n";
                    if (first.contains("command")) out << "command: " << first["command"].get<std::string>() << '\n';
                    return;
                }
            }
        }
        out << "kind: json-lines\nlines: " << lines << "\nkeys:";
        for (const auto& [k, v] : first.items()) out << ' ' << k;
        out << '\n';
        return;
    }
    throw FormatError(path.string() + ": unrecognized artifact format");
}

int exit_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return kUsage;
        case ErrorKind::io: return kIo;
        case ErrorKind::format: return kFormat;
        default: return kFailure;
    }
}

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::contract: return "contract";
        case ErrorKind::parse: return "parse";
        case ErrorKind::transport: return "transport";
    }
    return "error";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse autoencoder training engine"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

    std::function<void()> action;

    GenActsArgs ga;
    auto* gen = app.add_subcommand("gen-acts", "Schedule a dialogue corpus and write toy activations");
    gen->add_option("--corpus", ga.corpus, "Dialogue JSONL")->required();
    gen->add_option("--vocab", ga.vocab, "Vocabulary file")->required();
    gen->add_option("--out", ga.out, "Activation stream to write")->required();
    gen->add_option("--mode", ga.mode, "bt or fast")->check(CLI::IsMember({"bt", "fast"}));
    gen->add_option("--context-size", ga.context_size, "BT block length")->check(CLI::PositiveNumber);
    gen->add_option("--truncation", ga.truncation, "FAST per-instance token cap")->check(CLI::PositiveNumber);
    gen->add_option("--seed", ga.seed, "Toy producer seed");
    gen->add_option("--d-in", ga.d_in, "Activation width")->check(CLI::PositiveNumber);
    gen->callback([&] { action = [&] { cmd_gen_acts(ga, out); }; });

    DedupArgs da;
    auto* dd = app.add_subcommand("dedup", "Greedy n-gram deduplication of a dialogue corpus");
    dd->add_option("--in", da.in, "Dialogue JSONL")->required();
    dd->add_option("--out", da.out, "Deduplicated JSONL")->required();
    dd->add_option("--n", da.n, "n-gram size in words");
    dd->callback([&] { action = [&] { cmd_dedup(da, out); }; });

    TrainArgs ta;
    std::uint64_t seed_flag = 0, tokens_flag = 0;
    double lr_flag = 0;
    auto* tr = app.add_subcommand("train", "Train an SAE on an activation stream");
    tr->add_option("--stream", ta.stream, "Activation stream")->required();
    tr->add_option("--out", ta.out, "Checkpoint to write")->required();
    tr->add_option("--metrics", ta.metrics, "Per-step metrics JSONL (default <out>.metrics.jsonl)");
    tr->add_option("--config", ta.config, "key=value config file");
    tr->add_option("--set", ta.sets, "key=value override (repeatable)");
    tr->add_option("--preset", ta.preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
    tr->add_option("--arch", ta.arch, "standard or jumprelu")->check(CLI::IsMember({"standard", "jumprelu"}));
    auto* seed_opt = tr->add_option("--seed", seed_flag, "Training seed");
    auto* tokens_opt = tr->add_option("--total-tokens", tokens_flag, "Training token budget");
    auto* lr_opt = tr->add_option("--lr", lr_flag, "Peak learning rate");
    tr->add_flag("--serial", ta.serial, "Run the batched kernels without OpenMP");
    tr->callback([&] {
        if (*seed_opt) ta.seed = seed_flag;
        if (*tokens_opt) ta.total_tokens = tokens_flag;
        if (*lr_opt) ta.lr = lr_flag;
        action = [&] { cmd_train(ta, out); };
    });

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "MSE and MSE_st of a checkpoint on activation streams");
    ev->add_option("--checkpoint", ea.checkpoint, "SAE checkpoint")->required();
    ev->add_option("--stream", ea.streams, "Activation stream (repeatable)")->required();
    ev->add_option("--special-ids", ea.special_ids, "Comma-separated ids overriding the record flags");
    ev->add_option("--format", ea.format, "tsv or jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));
    ev->add_option("--out", ea.out, "Also write the table here");
    ev->callback([&] { action = [&] { cmd_eval(ea, out); }; });

    TopkArgs ka;
    auto* tk = app.add_subcommand("topk", "Top activating contexts per feature");
    tk->add_option("--checkpoint", ka.checkpoint, "SAE checkpoint")->required();
    tk->add_option("--stream", ka.stream, "Activation stream")->required();
    tk->add_option("--vocab", ka.vocab, "Vocabulary for token text");
    tk->add_option("--out", ka.out, "Feature contexts JSONL");
    tk->add_option("--top-n", ka.top_n, "Contexts per feature")->check(CLI::PositiveNumber);
    tk->add_option("--sample", ka.sample, "Sample this many eligible features (0 = all)");
    tk->add_option("--seed", ka.seed, "Feature sampling seed");
    tk->add_option("--token-stats", ka.token_stats, "Print the features with highest average max activation on a token");
    tk->callback([&] { action = [&] { cmd_topk(ka, out); }; });

    InterpArgs ia;
    auto* ip = app.add_subcommand("interp", "Score feature contexts with a chat model");
    ip->add_option("--contexts", ia.contexts, "Feature contexts JSONL")->required();
    ip->add_option("--out", ia.out, "Per-feature scores JSONL")->required();
    ip->add_option("--dist", ia.dist, "Histogram/CDF table (default <out>.dist.tsv)");
    ip->add_option("--endpoint", ia.endpoint, "Chat-completions URL");
    ip->add_option("--api-key-env", ia.api_key_env, "Environment variable holding the API key");
    ip->add_option("--model", ia.model, "Model name");
    ip->add_option("--temperature", ia.temperature, "Sampling temperature");
    ip->add_option("--parallel", ia.parallel, "Concurrent requests")->check(CLI::PositiveNumber);
    ip->add_option("--retries", ia.retries, "Retries after a transport failure")->check(CLI::NonNegativeNumber);
    ip->add_option("--audit", ia.audit, "Log every request and response as JSONL");
    ip->add_option("--mock", ia.mock, "Offline responder: cycle, const:N or script:FILE");
    ip->callback([&] { action = [&] { cmd_interp(ia, out); }; });

    SteerArgs sa;
    auto* st = app.add_subcommand("steer", "Export feature directions or tabulate a steering sweep");
    st->add_option("--checkpoint", sa.checkpoint, "SAE checkpoint")->required();
    st->add_option("--feature", sa.feature, "Feature index")->required();
    st->add_option("--export", sa.export_path, "Steering vector file to write");
    st->add_flag("--sweep", sa.sweep, "Print shift norms over the coefficient list");
    st->add_option("--coefficients", sa.coefficients, "Comma-separated alphas (default 0,15,25,50,100,150,200)");
    st->add_option("--stream", sa.stream, "Take z from this activation stream");
    st->add_option("--row", sa.row, "Record index of z in --stream");
    st->add_option("--out", sa.out, "Also write the sweep table here");
    st->callback([&] { action = [&] { cmd_steer(sa, out); }; });

    fs::path inspect_path;
    auto* in = app.add_subcommand("inspect", "Describe an artifact file");
    in->add_option("path", inspect_path, "Stream, checkpoint, steering vector or JSON file")->required();
    in->callback([&] { action = [&] { cmd_inspect(inspect_path, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        if (threads > 0) set_threads(threads);
        action();
        return kOk;
    } catch (const Error& e) {
        err << "error[" << kind_name(e.kind()) << "]: " << e.what() << '\n';
        return exit_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error[io]: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace fastsae::cli
