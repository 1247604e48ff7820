#include "alignlab/guided_decode.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace alignlab {

void validate_constraints(const std::vector<Constraint>& cs, int src_len) {
    std::vector<std::pair<int, int>> spans;
    for (auto& c : cs) {
        if (c.start < 1 || c.end < c.start || c.end > src_len)
            throw UsageError("constraint span out of bounds");
        if (c.end - c.start + 1 > 3) throw UsageError("constraint span longer than 3 tokens");
        if (c.tgt_tokens.empty()) throw UsageError("constraint has empty target");
        spans.push_back({c.start, c.end});
    }
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
        if (spans[i].first <= spans[i - 1].second)
            throw UsageError("overlapping constraint spans");
}

namespace {

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j)
        if (row[j] > row[best]) best = j;
    return best + 1;  // 1-based
}

}  // namespace

int AttnProbe::align_last(const std::vector<int>& src, const std::vector<int>& prefix) {
    if (prefix.empty()) throw UsageError("align_last: empty prefix");
    FwdOptions opt;
    auto r = forward_teacher_forced(*model_, src, prefix, opt);
    Mat s;
    switch (method_) {
        case InduceMethod::Naive:
            s = scores_naive(r.attn, layer_);
            break;
        case InduceMethod::Shift:
            s = scores_shift(r.attn, layer_);
            break;
        case InduceMethod::NaiveLayerAvg:
            s = scores_layer_avg(r.attn, false);
            break;
        case InduceMethod::ShiftLayerAvg:
            s = scores_layer_avg(r.attn, true);
            break;
    }
    return argmax_row(s.row(s.rows - 1), s.cols);
}

int AetProbe::align_last(const std::vector<int>& src, const std::vector<int>& prefix) {
    if (prefix.empty()) throw UsageError("align_last: empty prefix");
    Mat s = aet_forward(*model_, src, prefix);
    return argmax_row(s.row(s.rows - 1), s.cols);
}

std::vector<int> guided_greedy_decode(const TransformerModel& model, AlignProbe* probe,
                                      const std::vector<int>& src,
                                      const std::vector<Constraint>& constraints, int max_len) {
    if (max_len < 1) throw UsageError("guided_greedy_decode: max_len must be >= 1");
    validate_constraints(constraints, int(src.size()));
    if (constraints.empty() || probe == nullptr) {
        return greedy_decode(model, src, max_len).tokens;
    }
    std::vector<bool> used(constraints.size(), false);
    std::vector<int> prefix;
    std::vector<bool> pending;  // model-generated tokens awaiting an alignment check
    FwdOptions opt;
    auto enc_out = encode(model, src, opt);
    int emitted = 0;
    while (true) {
        if (!prefix.empty() && pending.back()) {
            pending.back() = false;
            int j = probe->align_last(src, prefix);
            int hit = -1;
            for (size_t ci = 0; ci < constraints.size(); ++ci)
                if (!used[ci] && j >= constraints[ci].start && j <= constraints[ci].end) {
                    hit = int(ci);
                    break;
                }
            if (hit >= 0) {
                // revise the last committed token with the constraint target
                prefix.pop_back();
                pending.pop_back();
                for (int tok : constraints[size_t(hit)].tgt_tokens) {
                    prefix.push_back(tok);
                    pending.push_back(false);
                }
                used[size_t(hit)] = true;
                continue;  // state rebuilt from the revision point on next pass
            }
        }
        if (emitted >= max_len) break;
        auto logits = next_token_logits(model, enc_out, prefix);
        int next = argmax_row(logits.data(), int(logits.size())) - 1;
        if (next == kEos) break;
        prefix.push_back(next);
        pending.push_back(true);
        ++emitted;
    }
    return prefix;
}

std::vector<ConstraintRecord> read_constraints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open constraint file: " + path);
    std::vector<ConstraintRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() != 3)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected 3 tab fields");
        ConstraintRecord rec;
        rec.sent_id = std::stoi(fields[0]);
        auto dash = fields[1].find('-');
        if (dash == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": bad span");
        rec.start = std::stoi(fields[1].substr(0, dash));
        rec.end = std::stoi(fields[1].substr(dash + 1));
        rec.tgt_tokens = split_tokens(fields[2]);
        if (rec.sent_id < 1 || rec.start < 1 || rec.end < rec.start || rec.tgt_tokens.empty())
            throw FormatError(path + ":" + std::to_string(lineno) + ": bad record");
        out.push_back(std::move(rec));
    }
    return out;
}

void write_constraints(const std::vector<ConstraintRecord>& recs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write constraint file: " + path);
    for (auto& r : recs) {
        out << r.sent_id << '\t' << r.start << '-' << r.end << '\t';
        for (size_t i = 0; i < r.tgt_tokens.size(); ++i) {
            if (i) out << ' ';
            out << r.tgt_tokens[i];
        }
        out << '\n';
    }
}

std::vector<ConstraintRecord> extract_constraints(
    const std::vector<std::vector<std::string>>& src_lines,
    const std::vector<std::vector<std::string>>& tgt_lines, const std::vector<AlignmentSet>& gold,
    const std::set<std::string>& stop_words, int max_per_sent, int max_src_span, Rng& rng) {
    if (src_lines.size() != tgt_lines.size() || src_lines.size() != gold.size())
        throw UsageError("extract_constraints: input sizes mismatch");
    std::vector<ConstraintRecord> out;
    for (size_t si = 0; si < src_lines.size(); ++si) {
        const auto& src = src_lines[si];
        const auto& tgt = tgt_lines[si];
        const auto& a = gold[si];
        // target positions aligned to each source position
        std::vector<std::vector<int>> tgt_of(src.size() + 1);
        for (auto& [s, t] : a.sure)
            if (s >= 1 && s <= int(src.size()) && t >= 1 && t <= int(tgt.size()))
                tgt_of[size_t(s)].push_back(t);
        struct Cand {
            int start, end;
            std::vector<int> tgt_pos;
        };
        std::vector<Cand> cands;
        for (int start = 1; start <= int(src.size()); ++start) {
            for (int span = 1; span <= max_src_span && start + span - 1 <= int(src.size());
                 ++span) {
                int end = start + span - 1;
                std::vector<int> tp;
                bool ok = true;
                for (int s = start; s <= end && ok; ++s) {
                    if (tgt_of[size_t(s)].empty()) ok = false;
                    if (stop_words.count(src[size_t(s - 1)])) ok = false;
                    for (int t : tgt_of[size_t(s)]) {
                        if (stop_words.count(tgt[size_t(t - 1)])) ok = false;
                        tp.push_back(t);
                    }
                }
                if (!ok || tp.empty()) continue;
                std::sort(tp.begin(), tp.end());
                tp.erase(std::unique(tp.begin(), tp.end()), tp.end());
                // aligned target words must be contiguous
                if (tp.back() - tp.front() + 1 != int(tp.size())) continue;
                cands.push_back({start, end, std::move(tp)});
            }
        }
        rng.shuffle(cands);
        std::vector<std::pair<int, int>> taken_src, taken_tgt;
        int picked = 0;
        for (auto& c : cands) {
            if (picked >= max_per_sent) break;
            bool clash = false;
            for (auto& [s0, s1] : taken_src)
                if (!(c.end < s0 || c.start > s1)) clash = true;
            for (auto& [t0, t1] : taken_tgt)
                if (!(c.tgt_pos.back() < t0 || c.tgt_pos.front() > t1)) clash = true;
            if (clash) continue;
            taken_src.push_back({c.start, c.end});
            taken_tgt.push_back({c.tgt_pos.front(), c.tgt_pos.back()});
            ConstraintRecord rec;
            rec.sent_id = int(si) + 1;
            rec.start = c.start;
            rec.end = c.end;
            for (int t : c.tgt_pos) rec.tgt_tokens.push_back(tgt[size_t(t - 1)]);
            out.push_back(std::move(rec));
            ++picked;
        }
    }
    std::sort(out.begin(), out.end(), [](const ConstraintRecord& a, const ConstraintRecord& b) {
        return std::tie(a.sent_id, a.start) < std::tie(b.sent_id, b.start);
    });
    return out;
}

}  // namespace alignlab
