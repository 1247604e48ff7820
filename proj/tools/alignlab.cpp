// alignlab: train small encoder-decoder translation models and induce,
// symmetrize and evaluate word alignments from their attention.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "alignlab/aet.hpp"
#include "alignlab/checkpoint.hpp"
#include "alignlab/corpus.hpp"
#include "alignlab/guided_decode.hpp"
#include "alignlab/induction.hpp"
#include "alignlab/layer_select.hpp"
#include "alignlab/metrics.hpp"
#include "alignlab/probe.hpp"
#include "alignlab/symmetrize.hpp"
#include "alignlab/transformer.hpp"

namespace fs = std::filesystem;
using namespace alignlab;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& config,
                    const std::vector<std::string>& inputs) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write manifest: " + path);
    for (auto& [k, v] : config) out << k << " = " << v << "\n";
    for (auto& f : inputs) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(f)));
        out << "input " << f << " " << buf << "\n";
    }
}

struct LoadedModel {
    TransformerModel model;
    Vocab src_vocab, tgt_vocab;
};

LoadedModel load_model_with_vocabs(const std::string& ckpt_path) {
    LoadedModel lm{load_model(ckpt_path), Vocab(), Vocab()};
    fs::path dir = fs::path(ckpt_path).parent_path();
    lm.src_vocab = Vocab::load((dir / "src.vocab").string());
    lm.tgt_vocab = Vocab::load((dir / "tgt.vocab").string());
    return lm;
}

int parse_layer(const std::string& layer_str, InduceMethod method, int n_layers) {
    int layer = layer_str == "auto" ? default_layer(method, n_layers) : std::stoi(layer_str);
    if (layer < 1 || layer > n_layers)
        throw UsageError("layer out of range: " + std::to_string(layer) + " (model has " +
                         std::to_string(n_layers) + " layers)");
    return layer;
}

std::vector<std::vector<std::string>> ids_to_lines(const std::vector<std::vector<int>>& idss,
                                                   const Vocab& vocab) {
    std::vector<std::vector<std::string>> out;
    out.reserve(idss.size());
    for (auto& ids : idss) out.push_back(vocab.decode(ids));
    return out;
}

// ---- subcommand bodies ----

int cmd_gen_synth(const std::string& out_dir, SynthSpec spec, int n_train, int n_valid,
                  int n_test) {
    fs::create_directories(out_dir);
    auto corpus = generate_synthetic(spec, n_train + n_valid + n_test);
    struct Split {
        const char* name;
        int begin, end;
    };
    std::vector<Split> splits = {{"train", 0, n_train},
                                 {"valid", n_train, n_train + n_valid},
                                 {"test", n_train + n_valid, n_train + n_valid + n_test}};
    for (auto& sp : splits) {
        std::vector<std::vector<std::string>> src, tgt;
        std::vector<AlignmentSet> gold;
        for (int i = sp.begin; i < sp.end; ++i) {
            auto& p = corpus.pairs[size_t(i)];
            src.push_back(corpus.src_vocab.decode(p.src));
            tgt.push_back(corpus.tgt_vocab.decode(p.tgt));
            gold.push_back(*p.gold);
        }
        std::string base = out_dir + "/" + sp.name;
        write_token_lines(src, base + ".src");
        write_token_lines(tgt, base + ".tgt");
        write_alignments(gold, base + ".talp");
    }
    corpus.src_vocab.save(out_dir + "/src.vocab");
    corpus.tgt_vocab.save(out_dir + "/tgt.vocab");
    write_manifest(out_dir + "/manifest.txt",
                   {{"command", "gen-synth"},
                    {"vocab", std::to_string(spec.vocab_size)},
                    {"len_min", std::to_string(spec.len_min)},
                    {"len_max", std::to_string(spec.len_max)},
                    {"p_swap", fmt("%.4f", spec.p_swap)},
                    {"window", std::to_string(spec.window)},
                    {"p_split", fmt("%.4f", spec.p_split)},
                    {"p_ins", fmt("%.4f", spec.p_ins)},
                    {"p_rotate", fmt("%.4f", spec.p_rotate)},
                    {"p_jump", fmt("%.4f", spec.p_jump)},
                    {"seed", std::to_string(spec.seed)},
                    {"train", std::to_string(n_train)},
                    {"valid", std::to_string(n_valid)},
                    {"test", std::to_string(n_test)}},
                   {});
    std::cout << "wrote " << n_train << "/" << n_valid << "/" << n_test << " pairs to "
              << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& src_path, const std::string& tgt_path,
              const std::string& valid_src, const std::string& valid_tgt,
              const std::string& out_dir, Hyper hp, TrainConfig cfg, int min_freq) {
    fs::create_directories(out_dir);
    auto corpus = load_parallel(src_path, tgt_path, min_freq);
    hp.src_vocab = corpus.src_vocab.size();
    hp.tgt_vocab = corpus.tgt_vocab.size();
    corpus.src_vocab.save(out_dir + "/src.vocab");
    corpus.tgt_vocab.save(out_dir + "/tgt.vocab");
    std::vector<ParallelPair> valid;
    if (!valid_src.empty())
        valid = encode_parallel(valid_src, valid_tgt, corpus.src_vocab, corpus.tgt_vocab);
    Rng init_rng(cfg.seed);
    auto model = TransformerModel::init(hp, init_rng);
    std::ofstream loss_log(out_dir + "/loss.log");
    cfg.checkpoint_dir = out_dir;
    cfg.validation = valid.empty() ? nullptr : &valid;
    cfg.log = &loss_log;
    auto stats = train(model, corpus.pairs, cfg);
    std::vector<std::string> inputs = {src_path, tgt_path};
    if (!valid_src.empty()) {
        inputs.push_back(valid_src);
        inputs.push_back(valid_tgt);
    }
    write_manifest(out_dir + "/manifest.txt",
                   {{"command", "train"},
                    {"epochs", std::to_string(cfg.epochs)},
                    {"batch_tokens", std::to_string(cfg.batch_tokens)},
                    {"lr", fmt("%.6f", cfg.lr)},
                    {"warmup", std::to_string(cfg.warmup_steps)},
                    {"label_smoothing", fmt("%.4f", cfg.label_smoothing)},
                    {"layers", std::to_string(hp.layers)},
                    {"heads", std::to_string(hp.heads)},
                    {"d_model", std::to_string(hp.d_model)},
                    {"d_ff", std::to_string(hp.d_ff)},
                    {"dropout", fmt("%.4f", hp.dropout)},
                    {"seed", std::to_string(cfg.seed)},
                    {"min_freq", std::to_string(min_freq)}},
                   inputs);
    std::cout << "final_train_loss=" << fmt("%.6f", stats.epoch_train_loss.back());
    if (!stats.epoch_valid_loss.empty())
        std::cout << " final_valid_loss=" << fmt("%.6f", stats.epoch_valid_loss.back());
    std::cout << "\n";
    return 0;
}

int cmd_align(const std::string& model_path, const std::string& src_path,
              const std::string& tgt_path, const std::string& method_str,
              const std::string& layer_str, const std::string& out_path) {
    std::vector<AlignmentSet> hyps;
    if (method_str == "aet") {
        auto aet = load_aet(model_path);
        fs::path dir = fs::path(model_path).parent_path();
        auto sv = Vocab::load((dir / "src.vocab").string());
        auto tv = Vocab::load((dir / "tgt.vocab").string());
        auto pairs = encode_parallel(src_path, tgt_path, sv, tv);
        for (auto& p : pairs) hyps.push_back(induce_aet(aet, p.src, p.tgt));
    } else {
        auto method = parse_method(method_str);
        auto lm = load_model_with_vocabs(model_path);
        int layer = parse_layer(layer_str, method, lm.model.hp.layers);
        auto pairs = encode_parallel(src_path, tgt_path, lm.src_vocab, lm.tgt_vocab);
        FwdOptions opt;
        for (auto& p : pairs) {
            auto r = forward_teacher_forced(lm.model, p.src, p.tgt, opt);
            hyps.push_back(induce(r.attn, method, layer));
        }
    }
    write_alignments(hyps, out_path);
    write_manifest(out_path + ".manifest",
                   {{"command", "align"},
                    {"model", model_path},
                    {"method", method_str},
                    {"layer", layer_str}},
                   {model_path, src_path, tgt_path});
    std::cout << "aligned " << hyps.size() << " sentence pairs -> " << out_path << "\n";
    return 0;
}

int cmd_symmetrize(const std::string& fwd_path, const std::string& rev_path,
                   const std::string& mode, const std::string& out_path) {
    auto fwd = read_alignments(fwd_path);
    auto rev = transpose_all(read_alignments(rev_path));
    if (fwd.size() != rev.size()) throw FormatError("symmetrize: sentence count mismatch");
    std::vector<AlignmentSet> merged;
    for (size_t i = 0; i < fwd.size(); ++i) {
        if (mode == "grow-diag")
            merged.push_back(grow_diag(fwd[i], rev[i]));
        else if (mode == "intersection")
            merged.push_back(alignment_intersection(fwd[i], rev[i]));
        else if (mode == "union")
            merged.push_back(alignment_union(fwd[i], rev[i]));
        else
            throw UsageError("unknown symmetrization mode: " + mode);
    }
    write_alignments(merged, out_path);
    write_manifest(out_path + ".manifest",
                   {{"command", "symmetrize"}, {"mode", mode}}, {fwd_path, rev_path});
    return 0;
}

int cmd_select_layer(const std::string& fwd_model, const std::string& rev_model,
                     const std::string& src_path, const std::string& tgt_path,
                     const std::string& method_str, const std::string& out_path) {
    auto method = parse_method(method_str);
    auto fwd = load_model_with_vocabs(fwd_model);
    auto rev = load_model_with_vocabs(rev_model);
    auto pairs = encode_parallel(src_path, tgt_path, fwd.src_vocab, fwd.tgt_vocab);
    auto res = select_layers(fwd.model, rev.model, pairs, method);
    std::string text;
    for (int i = 0; i < res.agreement_aer.rows; ++i) {
        for (int j = 0; j < res.agreement_aer.cols; ++j) {
            if (j) text += ",";
            text += fmt("%.4f", res.agreement_aer.at(i, j));
        }
        text += "\n";
    }
    text += "selected=" + std::to_string(res.layer_fwd) + "," + std::to_string(res.layer_rev) +
            "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << text;
        write_manifest(out_path + ".manifest",
                       {{"command", "select-layer"}, {"method", method_str}},
                       {fwd_model, rev_model, src_path, tgt_path});
    }
    return 0;
}

int cmd_train_aet(const std::string& base_path, const std::string& src_path,
                  const std::string& tgt_path, const std::string& labels_path, int l_b,
                  AetTrainConfig cfg, const std::string& out_path) {
    auto lm = load_model_with_vocabs(base_path);
    auto pairs = encode_parallel(src_path, tgt_path, lm.src_vocab, lm.tgt_vocab);
    auto labels = read_alignments(labels_path);
    if (labels.size() != pairs.size())
        throw UsageError("train-aet: label/corpus sentence count mismatch");
    Rng rng(cfg.seed);
    auto aet = AetModel::init(std::move(lm.model), l_b, rng);
    std::ostream* old_log = cfg.log;
    cfg.log = old_log ? old_log : &std::cout;
    auto stats = train_aet(aet, pairs, labels, cfg);
    fs::path out_dir = fs::path(out_path).parent_path();
    if (!out_dir.empty()) fs::create_directories(out_dir);
    save_aet(aet, out_path);
    if (!out_dir.empty()) {
        // vocabs alongside the AET checkpoint for later align runs
        lm.src_vocab.save((out_dir / "src.vocab").string());
        lm.tgt_vocab.save((out_dir / "tgt.vocab").string());
    }
    write_manifest(out_path + ".manifest",
                   {{"command", "train-aet"},
                    {"l_b", std::to_string(l_b)},
                    {"updates", std::to_string(cfg.max_updates)},
                    {"batch_sentences", std::to_string(cfg.batch_sentences)},
                    {"lr", fmt("%.6f", cfg.lr)},
                    {"seed", std::to_string(cfg.seed)}},
                   {base_path, src_path, tgt_path, labels_path});
    std::cout << "final_aet_loss=" << fmt("%.6f", stats.step_loss.back()) << "\n";
    return 0;
}

int cmd_aer(const std::string& hyp_path, const std::string& ref_path,
            const std::string& out_path) {
    auto hyp = read_alignments(hyp_path);
    auto ref = read_alignments(ref_path);
    if (hyp.size() != ref.size()) throw FormatError("aer: sentence count mismatch");
    auto c = corpus_aer(hyp, ref);
    std::string line = "AER=" + fmt("%.4f", c.aer()) + " P=" + fmt("%.4f", c.precision()) +
                       " R=" + fmt("%.4f", c.recall()) + " links_hyp=" + std::to_string(c.a) +
                       " links_sure=" + std::to_string(c.s) + "\n";
    std::cout << line;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << line;
        write_manifest(out_path + ".manifest", {{"command", "aer"}}, {hyp_path, ref_path});
    }
    return 0;
}

int cmd_bleu(const std::string& hyp_path, const std::string& ref_path,
             const std::string& out_path) {
    auto hyps = read_token_lines(hyp_path);
    auto refs = read_token_lines(ref_path);
    std::string line = "BLEU=" + fmt("%.4f", bleu(hyps, refs)) + "\n";
    std::cout << line;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << line;
        write_manifest(out_path + ".manifest", {{"command", "bleu"}}, {hyp_path, ref_path});
    }
    return 0;
}

int cmd_decode(const std::string& model_path, const std::string& src_path, int max_len,
               const std::string& out_path) {
    auto lm = load_model_with_vocabs(model_path);
    auto src_lines = read_token_lines(src_path);
    std::vector<std::vector<int>> outs;
    for (auto& line : src_lines) {
        if (line.empty()) {
            outs.push_back({});
            continue;
        }
        outs.push_back(greedy_decode(lm.model, lm.src_vocab.encode(line), max_len).tokens);
    }
    write_token_lines(ids_to_lines(outs, lm.tgt_vocab), out_path);
    write_manifest(out_path + ".manifest",
                   {{"command", "decode"}, {"max_len", std::to_string(max_len)}},
                   {model_path, src_path});
    return 0;
}

int cmd_guided_decode(const std::string& model_path, const std::string& src_path,
                      const std::string& constraints_path, const std::string& method_str,
                      const std::string& layer_str, int max_len, const std::string& out_path) {
    auto src_lines = read_token_lines(src_path);
    auto recs = read_constraints(constraints_path);

    TransformerModel base;
    std::unique_ptr<AetModel> aet;
    std::unique_ptr<AlignProbe> probe;
    Vocab src_vocab, tgt_vocab;
    fs::path dir = fs::path(model_path).parent_path();
    src_vocab = Vocab::load((dir / "src.vocab").string());
    tgt_vocab = Vocab::load((dir / "tgt.vocab").string());
    if (method_str == "aet") {
        aet = std::make_unique<AetModel>(load_aet(model_path));
        base = aet->base;
        probe = std::make_unique<AetProbe>(*aet);
    } else {
        auto method = parse_method(method_str);
        base = load_model(model_path);
        int layer = parse_layer(layer_str, method, base.hp.layers);
        probe = std::make_unique<AttnProbe>(base, method, layer);
    }

    std::vector<std::vector<Constraint>> per_sent(src_lines.size());
    for (auto& r : recs) {
        if (r.sent_id < 1 || r.sent_id > int(src_lines.size()))
            throw FormatError("constraint sent_id out of range: " + std::to_string(r.sent_id));
        Constraint c;
        c.start = r.start;
        c.end = r.end;
        c.tgt_tokens = tgt_vocab.encode(r.tgt_tokens);
        per_sent[size_t(r.sent_id - 1)].push_back(std::move(c));
    }

    std::vector<std::vector<int>> outs;
    for (size_t i = 0; i < src_lines.size(); ++i) {
        if (src_lines[i].empty()) {
            outs.push_back({});
            continue;
        }
        auto src = src_vocab.encode(src_lines[i]);
        outs.push_back(guided_greedy_decode(base, probe.get(), src, per_sent[i], max_len));
    }
    write_token_lines(ids_to_lines(outs, tgt_vocab), out_path);
    write_manifest(out_path + ".manifest",
                   {{"command", "guided-decode"},
                    {"method", method_str},
                    {"layer", layer_str},
                    {"max_len", std::to_string(max_len)}},
                   {model_path, src_path, constraints_path});
    return 0;
}

int cmd_gen_constraints(const std::string& src_path, const std::string& tgt_path,
                        const std::string& gold_path, const std::string& stop_path,
                        int max_per_sent, int max_src_span, uint64_t seed,
                        const std::string& out_path) {
    auto src_lines = read_token_lines(src_path);
    auto tgt_lines = read_token_lines(tgt_path);
    auto gold = read_alignments(gold_path);
    std::set<std::string> stops;
    if (!stop_path.empty())
        for (auto& line : read_token_lines(stop_path))
            for (auto& t : line) stops.insert(t);
    Rng rng(seed);
    auto recs =
        extract_constraints(src_lines, tgt_lines, gold, stops, max_per_sent, max_src_span, rng);
    write_constraints(recs, out_path);
    write_manifest(out_path + ".manifest",
                   {{"command", "gen-constraints"},
                    {"max_per_sent", std::to_string(max_per_sent)},
                    {"max_src_span", std::to_string(max_src_span)},
                    {"seed", std::to_string(seed)}},
                   {src_path, tgt_path, gold_path});
    std::cout << "wrote " << recs.size() << " constraints -> " << out_path << "\n";
    return 0;
}

int cmd_probe(const std::string& model_path, const std::string& src_path,
              const std::string& tgt_path, const std::string& layer_str,
              const std::string& mode_str, const std::string& kind_str, uint64_t seed,
              const std::string& csv_path) {
    auto lm = load_model_with_vocabs(model_path);
    auto pairs = encode_parallel(src_path, tgt_path, lm.src_vocab, lm.tgt_vocab);
    std::vector<int> layers;
    if (layer_str == "all")
        for (int l = 1; l <= lm.model.hp.layers; ++l) layers.push_back(l);
    else
        layers.push_back(parse_layer(layer_str, InduceMethod::Shift, lm.model.hp.layers));
    std::vector<ProbeMode> modes;
    if (mode_str == "both")
        modes = {ProbeMode::Input, ProbeMode::Output};
    else
        modes = {parse_probe_mode(mode_str)};
    std::vector<ProbeKind> kinds;
    if (kind_str == "all")
        kinds = {ProbeKind::Naive, ProbeKind::Linear, ProbeKind::Mlp};
    else
        kinds = {parse_probe_kind(kind_str)};
    auto mode_name = [](ProbeMode m) { return m == ProbeMode::Input ? "input" : "output"; };
    auto kind_name = [](ProbeKind k) {
        return k == ProbeKind::Naive ? "naive" : (k == ProbeKind::Linear ? "linear" : "mlp");
    };
    std::string csv = "layer,mode,kind,rate\n";
    ProbeFitConfig cfg;
    cfg.seed = seed;
    for (int l : layers)
        for (auto mode : modes)
            for (auto kind : kinds) {
                auto res = identifiability_rate(lm.model, pairs, l, mode, kind, cfg);
                std::cout << "layer=" << l << " mode=" << mode_name(mode)
                          << " kind=" << kind_name(kind) << " rate=" << fmt("%.4f", res.rate)
                          << "\n";
                csv += std::to_string(l) + "," + mode_name(mode) + "," + kind_name(kind) + "," +
                       fmt("%.4f", res.rate) + "\n";
            }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        out << csv;
        write_manifest(csv_path + ".manifest",
                       {{"command", "probe"}, {"seed", std::to_string(seed)}},
                       {model_path, src_path, tgt_path});
    }
    return 0;
}

int cmd_sweep(const std::string& ckpt_dir, const std::string& valid_src,
              const std::string& valid_tgt, const std::string& test_src,
              const std::string& test_tgt, const std::string& test_ref,
              const std::string& method_str, int max_len, const std::string& out_path) {
    auto method = parse_method(method_str);
    auto gold = read_alignments(test_ref);
    std::vector<std::pair<int, std::string>> ckpts;
    for (auto& e : fs::directory_iterator(ckpt_dir)) {
        std::string name = e.path().filename().string();
        const std::string prefix = "ckpt-epoch-";
        if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 4)
            ckpts.push_back({std::stoi(name.substr(prefix.size())), e.path().string()});
    }
    std::sort(ckpts.begin(), ckpts.end());
    if (ckpts.empty()) throw UsageError("sweep-checkpoints: no ckpt-epoch-*.bin in " + ckpt_dir);
    auto sv = Vocab::load(ckpt_dir + "/src.vocab");
    auto tv = Vocab::load(ckpt_dir + "/tgt.vocab");
    auto valid_lines = read_token_lines(valid_src);
    auto valid_refs = read_token_lines(valid_tgt);
    auto test_pairs = encode_parallel(test_src, test_tgt, sv, tv);
    if (test_pairs.size() != gold.size())
        throw FormatError("sweep-checkpoints: test/reference sentence count mismatch");
    std::string csv = "epoch,layer,method,test_aer,valid_bleu\n";
    for (auto& [epoch, path] : ckpts) {
        auto model = load_model(path);
        std::vector<std::vector<std::string>> hyp_lines;
        for (auto& line : valid_lines) {
            if (line.empty()) {
                hyp_lines.push_back({});
                continue;
            }
            hyp_lines.push_back(
                tv.decode(greedy_decode(model, sv.encode(line), max_len).tokens));
        }
        double b = bleu(hyp_lines, valid_refs);
        auto per_layer = per_layer_alignments(model, test_pairs, method);
        for (int l = 1; l <= model.hp.layers; ++l) {
            auto c = corpus_aer(per_layer[size_t(l - 1)], gold);
            csv += std::to_string(epoch) + "," + std::to_string(l) + "," + method_str + "," +
                   fmt("%.4f", c.aer()) + "," + fmt("%.4f", b) + "\n";
        }
        std::cout << "epoch " << epoch << " valid_bleu=" << fmt("%.4f", b) << "\n";
    }
    std::ofstream out(out_path);
    out << csv;
    write_manifest(out_path + ".manifest",
                   {{"command", "sweep-checkpoints"}, {"method", method_str}},
                   {valid_src, valid_tgt, test_src, test_tgt, test_ref});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"alignlab: word alignment induction from attention"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value config file");
    app.allow_config_extras(CLI::config_extras_mode::ignore);

    // gen-synth
    auto* gs = app.add_subcommand("gen-synth", "generate a synthetic parallel corpus with gold alignments");
    std::string gs_out;
    SynthSpec spec;
    int gs_train = 10000, gs_valid = 500, gs_test = 500;
    gs->add_option("--out", gs_out, "output directory")->required();
    gs->add_option("--vocab", spec.vocab_size, "source vocabulary size");
    gs->add_option("--min-len", spec.len_min, "minimum source length");
    gs->add_option("--max-len", spec.len_max, "maximum source length");
    gs->add_option("--p-swap", spec.p_swap, "adjacent swap probability");
    gs->add_option("--window", spec.window, "block permutation window");
    gs->add_option("--p-split", spec.p_split, "fertility split probability");
    gs->add_option("--p-ins", spec.p_ins, "noise insertion probability");
    gs->add_option("--p-rotate", spec.p_rotate, "per-sentence probability of a rotated read order");
    gs->add_option("--p-jump", spec.p_jump, "probability of jumping to a random unread position");
    gs->add_option("--seed", spec.seed, "rng seed");
    gs->add_option("--train", gs_train, "training pairs");
    gs->add_option("--valid", gs_valid, "validation pairs");
    gs->add_option("--test", gs_test, "test pairs");

    // train
    auto* tr = app.add_subcommand("train", "train a base translation model");
    std::string tr_src, tr_tgt, tr_vsrc, tr_vtgt, tr_out;
    Hyper hp;
    TrainConfig tcfg;
    int tr_min_freq = 1;
    tr->add_option("--src", tr_src)->required();
    tr->add_option("--tgt", tr_tgt)->required();
    tr->add_option("--valid-src", tr_vsrc);
    tr->add_option("--valid-tgt", tr_vtgt);
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--epochs", tcfg.epochs);
    tr->add_option("--batch-tokens", tcfg.batch_tokens);
    tr->add_option("--lr", tcfg.lr);
    tr->add_option("--warmup", tcfg.warmup_steps);
    tr->add_option("--label-smoothing", tcfg.label_smoothing);
    tr->add_option("--clip-norm", tcfg.clip_norm);
    tr->add_option("--seed", tcfg.seed);
    tr->add_option("--layers", hp.layers);
    tr->add_option("--heads", hp.heads);
    tr->add_option("--d-model", hp.d_model);
    tr->add_option("--d-ff", hp.d_ff);
    tr->add_option("--dropout", hp.dropout);
    tr->add_option("--min-freq", tr_min_freq, "vocabulary min token frequency");

    // align
    auto* al = app.add_subcommand("align", "induce alignments for a parallel file pair");
    std::string al_model, al_src, al_tgt, al_method = "shift", al_layer = "auto", al_out;
    al->add_option("--model", al_model)->required();
    al->add_option("--src", al_src)->required();
    al->add_option("--tgt", al_tgt)->required();
    al->add_option("--method", al_method, "naive|shift|naive-la|shift-la|aet");
    al->add_option("--layer", al_layer, "layer index or 'auto'");
    al->add_option("--out", al_out)->required();

    // symmetrize
    auto* sy = app.add_subcommand("symmetrize", "merge bidirectional alignments");
    std::string sy_fwd, sy_rev, sy_mode = "grow-diag", sy_out;
    sy->add_option("--fwd", sy_fwd, "forward-direction talp file")->required();
    sy->add_option("--rev", sy_rev, "reverse-direction talp file")->required();
    sy->add_option("--mode", sy_mode, "grow-diag|intersection|union");
    sy->add_option("--out", sy_out)->required();

    // select-layer
    auto* sl = app.add_subcommand("select-layer", "cross-direction agreement layer selection");
    std::string sl_fwd, sl_rev, sl_src, sl_tgt, sl_method = "shift", sl_out;
    sl->add_option("--fwd-model", sl_fwd)->required();
    sl->add_option("--rev-model", sl_rev)->required();
    sl->add_option("--src", sl_src, "validation source (forward direction)")->required();
    sl->add_option("--tgt", sl_tgt, "validation target (forward direction)")->required();
    sl->add_option("--method", sl_method, "naive|shift");
    sl->add_option("--out", sl_out);

    // train-aet
    auto* ta = app.add_subcommand("train-aet", "train the alignment module on a frozen base");
    std::string ta_base, ta_src, ta_tgt, ta_labels, ta_out;
    int ta_lb = 3;
    AetTrainConfig acfg;
    ta->add_option("--base", ta_base, "base model checkpoint")->required();
    ta->add_option("--src", ta_src)->required();
    ta->add_option("--tgt", ta_tgt)->required();
    ta->add_option("--labels", ta_labels, "symmetrized alignment labels (talp)")->required();
    ta->add_option("--lb", ta_lb, "attachment layer");
    ta->add_option("--updates", acfg.max_updates);
    ta->add_option("--batch", acfg.batch_sentences);
    ta->add_option("--lr", acfg.lr);
    ta->add_option("--seed", acfg.seed);
    ta->add_option("--out", ta_out, "output checkpoint path")->required();

    // aer
    auto* ae = app.add_subcommand("aer", "alignment error rate");
    std::string ae_hyp, ae_ref, ae_out;
    ae->add_option("--hyp", ae_hyp)->required();
    ae->add_option("--ref", ae_ref)->required();
    ae->add_option("--out", ae_out, "also write the metrics line to this file");

    // bleu
    auto* bl = app.add_subcommand("bleu", "corpus BLEU-4");
    std::string bl_hyp, bl_ref, bl_out;
    bl->add_option("--hyp", bl_hyp)->required();
    bl->add_option("--ref", bl_ref)->required();
    bl->add_option("--out", bl_out);

    // decode
    auto* de = app.add_subcommand("decode", "greedy decoding");
    std::string de_model, de_src, de_out;
    int de_max_len = 50;
    de->add_option("--model", de_model)->required();
    de->add_option("--src", de_src)->required();
    de->add_option("--max-len", de_max_len);
    de->add_option("--out", de_out)->required();

    // guided-decode
    auto* gd = app.add_subcommand("guided-decode", "dictionary-guided greedy decoding");
    std::string gd_model, gd_src, gd_cons, gd_method = "shift", gd_layer = "auto", gd_out;
    int gd_max_len = 50;
    gd->add_option("--model", gd_model)->required();
    gd->add_option("--src", gd_src)->required();
    gd->add_option("--constraints", gd_cons)->required();
    gd->add_option("--method", gd_method, "naive|shift|naive-la|shift-la|aet");
    gd->add_option("--layer", gd_layer);
    gd->add_option("--max-len", gd_max_len);
    gd->add_option("--out", gd_out)->required();

    // gen-constraints
    auto* gc = app.add_subcommand("gen-constraints", "sample dictionary constraints from gold alignments");
    std::string gc_src, gc_tgt, gc_gold, gc_stop, gc_out;
    int gc_max_per = 3, gc_max_span = 3;
    uint64_t gc_seed = 1;
    gc->add_option("--src", gc_src)->required();
    gc->add_option("--tgt", gc_tgt)->required();
    gc->add_option("--gold", gc_gold)->required();
    gc->add_option("--stop-words", gc_stop, "whitespace-separated stop word file");
    gc->add_option("--max-per-sentence", gc_max_per);
    gc->add_option("--max-span", gc_max_span);
    gc->add_option("--seed", gc_seed);
    gc->add_option("--out", gc_out)->required();

    // probe
    auto* pr = app.add_subcommand("probe", "hidden-state identifiability rates");
    std::string pr_model, pr_src, pr_tgt, pr_layer = "all", pr_mode = "both", pr_kind = "all",
                pr_csv;
    uint64_t pr_seed = 1;
    pr->add_option("--model", pr_model)->required();
    pr->add_option("--src", pr_src)->required();
    pr->add_option("--tgt", pr_tgt)->required();
    pr->add_option("--layer", pr_layer, "layer index or 'all'");
    pr->add_option("--mode", pr_mode, "input|output|both");
    pr->add_option("--kind", pr_kind, "naive|linear|mlp|all");
    pr->add_option("--seed", pr_seed);
    pr->add_option("--csv", pr_csv, "write rates as CSV");

    // sweep-checkpoints
    auto* sw = app.add_subcommand("sweep-checkpoints", "AER-vs-BLEU per layer per checkpoint");
    std::string sw_dir, sw_vsrc, sw_vtgt, sw_tsrc, sw_ttgt, sw_tref, sw_method = "shift", sw_out;
    int sw_max_len = 50;
    sw->add_option("--ckpt-dir", sw_dir)->required();
    sw->add_option("--valid-src", sw_vsrc)->required();
    sw->add_option("--valid-tgt", sw_vtgt)->required();
    sw->add_option("--test-src", sw_tsrc)->required();
    sw->add_option("--test-tgt", sw_ttgt)->required();
    sw->add_option("--test-ref", sw_tref)->required();
    sw->add_option("--method", sw_method, "naive|shift");
    sw->add_option("--max-len", sw_max_len);
    sw->add_option("--out", sw_out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
        if (gs->parsed()) return cmd_gen_synth(gs_out, spec, gs_train, gs_valid, gs_test);
        if (tr->parsed())
            return cmd_train(tr_src, tr_tgt, tr_vsrc, tr_vtgt, tr_out, hp, tcfg, tr_min_freq);
        if (al->parsed()) return cmd_align(al_model, al_src, al_tgt, al_method, al_layer, al_out);
        if (sy->parsed()) return cmd_symmetrize(sy_fwd, sy_rev, sy_mode, sy_out);
        if (sl->parsed())
            return cmd_select_layer(sl_fwd, sl_rev, sl_src, sl_tgt, sl_method, sl_out);
        if (ta->parsed())
            return cmd_train_aet(ta_base, ta_src, ta_tgt, ta_labels, ta_lb, acfg, ta_out);
        if (ae->parsed()) return cmd_aer(ae_hyp, ae_ref, ae_out);
        if (bl->parsed()) return cmd_bleu(bl_hyp, bl_ref, bl_out);
        if (de->parsed()) return cmd_decode(de_model, de_src, de_max_len, de_out);
        if (gd->parsed())
            return cmd_guided_decode(gd_model, gd_src, gd_cons, gd_method, gd_layer, gd_max_len,
                                     gd_out);
        if (gc->parsed())
            return cmd_gen_constraints(gc_src, gc_tgt, gc_gold, gc_stop, gc_max_per, gc_max_span,
                                       gc_seed, gc_out);
        if (pr->parsed())
            return cmd_probe(pr_model, pr_src, pr_tgt, pr_layer, pr_mode, pr_kind, pr_seed,
                             pr_csv);
        if (sw->parsed())
            return cmd_sweep(sw_dir, sw_vsrc, sw_vtgt, sw_tsrc, sw_ttgt, sw_tref, sw_method,
                             sw_max_len, sw_out);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IndexError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
