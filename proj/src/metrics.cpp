#include "nmtadv/metrics.hpp"

#include "nmtadv/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace nmtadv {

namespace {

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
  return counts;
}

}  // namespace

BleuScore corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      bool smoothing) {
  if (hypotheses.size() != references.size())
    throw InputError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                     std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw InputError("corpus_bleu: empty corpus");

  BleuScore s;
  s.smoothed = smoothing;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = whitespace_tokens(hypotheses[i]);
    const auto ref = whitespace_tokens(references[i]);
    s.hyp_length += hyp.size();
    s.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngrams(hyp, n);
      const auto r = ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        const auto it = r.find(gram);
        s.matches[n - 1] += std::min(count, it == r.end() ? std::size_t{0} : it->second);
        s.totals[n - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t k = 0; k < 4; ++k) {
    double p = 1.0;
    if (s.totals[k] > 0) {
      p = static_cast<double>(s.matches[k]) / static_cast<double>(s.totals[k]);
      if (s.matches[k] == 0 && smoothing && k > 0) p = 1.0 / static_cast<double>(s.totals[k] + 1);
    }
    s.precisions[k] = p;
    if (p == 0.0)
      zero = true;
    else
      log_sum += std::log(p) / 4.0;
  }
  if (s.hyp_length == 0)
    s.brevity_penalty = s.ref_length == 0 ? 1.0 : 0.0;
  else if (s.hyp_length < s.ref_length)
    s.brevity_penalty = std::exp(1.0 - static_cast<double>(s.ref_length) / static_cast<double>(s.hyp_length));
  s.value = zero ? 0.0 : 100.0 * s.brevity_penalty * std::exp(log_sum);
  return s;
}

std::vector<Outcome> outcomes_of(std::span<const AttackResult> results) {
  std::vector<Outcome> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back({r.success, r.nor});
  return out;
}

double success_rate(std::span<const Outcome> results) {
  if (results.empty()) throw InputError("success_rate: no results");
  const auto hits = std::count_if(results.begin(), results.end(), [](const Outcome& o) { return o.success; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

double success_rate(std::span<const AttackResult> results) { return success_rate(outcomes_of(results)); }

NorStats nor_stats(std::span<const Outcome> results) {
  if (results.empty()) throw InputError("nor_stats: no results");
  std::vector<double> v;
  v.reserve(results.size());
  for (const auto& o : results) v.push_back(o.nor);
  NorStats s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

NorStats nor_stats(std::span<const AttackResult> results) { return nor_stats(outcomes_of(results)); }

BleuMatrix bleu_matrix(std::span<const std::string> originals, std::span<const std::string> adversarials,
                       std::span<const FleetMember> fleet, std::size_t attacked, int beam_width, bool smoothing) {
  if (originals.size() != adversarials.size())
    throw InputError("bleu_matrix: " + std::to_string(originals.size()) + " originals but " +
                     std::to_string(adversarials.size()) + " adversarial sentences");
  if (attacked >= fleet.size()) throw ContractViolation("bleu_matrix: attacked model is not in the fleet");

  std::vector<std::size_t> order{attacked};
  for (std::size_t m = 0; m < fleet.size(); ++m)
    if (m != attacked) order.push_back(m);

  // Translate everything first; a pair any member cannot translate is dropped
  // from every cell so all cells cover the same sentences.
  const std::size_t n = originals.size();
  std::vector<std::vector<std::string>> orig_out(fleet.size(), std::vector<std::string>(n));
  std::vector<std::vector<std::string>> adv_out(fleet.size(), std::vector<std::string>(n));
  std::vector<std::uint8_t> keep(n, 1);
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    const FleetMember& f = fleet[m];
    const int max_len = f.model->config().max_len;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      const TokenSeq a = f.tokenizer->encode(originals[i]);
      const TokenSeq b = f.tokenizer->encode(adversarials[i]);
      if (a.ids.empty() || b.ids.empty() || static_cast<int>(a.size()) > max_len || static_cast<int>(b.size()) > max_len) {
        keep[i] = 0;
        continue;
      }
      orig_out[m][i] = f.tokenizer->decode(translate(*f.model, a.ids, beam_width).ids);
      adv_out[m][i] = f.tokenizer->decode(translate(*f.model, b.ids, beam_width).ids);
    }
  }

  BleuMatrix out;
  std::vector<std::string> src_ref, src_hyp;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    src_ref.push_back(originals[i]);
    src_hyp.push_back(adversarials[i]);
  }
  out.used = src_ref.size();
  out.excluded = n - out.used;
  if (out.used == 0) throw InputError("bleu_matrix: no sentence pair could be translated by every model");
  out.b_src = corpus_bleu(src_hyp, src_ref, smoothing).value;
  for (std::size_t m : order) {
    std::vector<std::string> ref, hyp;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      ref.push_back(orig_out[m][i]);
      hyp.push_back(adv_out[m][i]);
    }
    out.b.push_back(corpus_bleu(hyp, ref, smoothing).value);
    out.names.push_back(fleet[m].name);
  }
  return out;
}

double composite_score(double b_src, double b_attacked, std::span<const double> b_others) {
  auto check = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 100.0)) throw InputError(std::string("composite_score: ") + what + " outside [0, 100]");
  };
  check(b_src, "b_src");
  check(b_attacked, "attacked-model BLEU");
  double total = b_src + (100.0 - b_attacked);
  for (double b : b_others) {
    check(b, "other-model BLEU");
    total += b;
  }
  return total / static_cast<double>(b_others.size() + 2);
}

double EvalReport::recompute_e() const {
  if (b.empty()) throw InputError("report has no BLEU values");
  return composite_score(b_src, b.front(), std::span<const double>(b).subspan(1));
}

// -- rendering ----------------------------------------------------------------------------

std::string report_json(std::span<const EvalReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["method"] = r.method;
    j["sentences"] = r.sentences;
    j["success_rate"] = r.success_rate;
    j["nor_mean"] = r.nor_mean;
    j["nor_median"] = r.nor_median;
    if (r.has_bleu) {
      j["b_src"] = r.b_src;
      j["b"] = r.b;
      j["e"] = r.e;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

namespace {

std::size_t max_fleet(std::span<const EvalReport> reports) {
  std::size_t k = 0;
  for (const auto& r : reports) k = std::max(k, r.b.size());
  return k;
}

std::string fixed2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

}  // namespace

std::string report_markdown(std::span<const EvalReport> reports) {
  const std::size_t k = max_fleet(reports);
  std::ostringstream out;
  out << "| model | method | sentences | success (%) | NOR mean | NOR median |";
  if (k > 0) out << " src |";
  for (std::size_t m = 0; m < k; ++m) out << " l" << m + 1 << " |";
  if (k > 0) out << " e(M) |";
  out << "\n|---|---|---:|---:|---:|---:|";
  for (std::size_t m = 0; m < (k > 0 ? k + 2 : 0); ++m) out << "---:|";
  out << '\n';
  for (const auto& r : reports) {
    out << "| " << r.model << " | " << r.method << " | " << r.sentences << " | " << fixed2(r.success_rate) << " | "
        << fixed2(r.nor_mean) << " | " << fixed2(r.nor_median) << " |";
    if (k > 0) {
      out << ' ' << (r.has_bleu ? fixed2(r.b_src) : "") << " |";
      for (std::size_t m = 0; m < k; ++m) out << ' ' << (m < r.b.size() ? fixed2(r.b[m]) : "") << " |";
      out << ' ' << (r.has_bleu ? fixed2(r.e) : "") << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string report_csv(std::span<const EvalReport> reports) {
  const std::size_t k = max_fleet(reports);
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "model,method,sentences,success_rate,nor_mean,nor_median,b_src";
  for (std::size_t m = 0; m < k; ++m) out << ",b_l" << m + 1;
  out << ",e\n";
  for (const auto& r : reports) {
    out << r.model << ',' << r.method << ',' << r.sentences << ',' << r.success_rate << ',' << r.nor_mean << ','
        << r.nor_median << ',';
    if (r.has_bleu) out << r.b_src;
    for (std::size_t m = 0; m < k; ++m) {
      out << ',';
      if (m < r.b.size()) out << r.b[m];
    }
    out << ',';
    if (r.has_bleu) out << r.e;
    out << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<EvalReport> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("report csv: missing header");
  const auto header = split_csv(line);
  if (header.size() < 8 || header[0] != "model" || header.back() != "e")
    throw FormatError("report csv: unexpected header '" + line + "'");
  const std::size_t k = header.size() - 8;
  std::vector<EvalReport> out;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(no) + ": expected " + std::to_string(header.size()) + " fields");
    EvalReport r;
    r.model = cells[0];
    r.method = cells[1];
    r.sentences = static_cast<std::size_t>(parse_double(cells[2], no));
    r.success_rate = parse_double(cells[3], no);
    r.nor_mean = parse_double(cells[4], no);
    r.nor_median = parse_double(cells[5], no);
    r.has_bleu = !cells[6].empty();
    if (r.has_bleu) {
      r.b_src = parse_double(cells[6], no);
      for (std::size_t m = 0; m < k; ++m)
        if (!cells[7 + m].empty()) r.b.push_back(parse_double(cells[7 + m], no));
      r.e = parse_double(cells.back(), no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<BleuRow> read_bleu_rows(std::istream& in) {
  std::vector<BleuRow> rows;
  std::vector<std::string> header;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (header.empty()) {
      header = cells;
      if (header.size() < 7 || header[0] != "model" || header[3] != "b_src" || header.back() != "e")
        throw FormatError("bleu rows: unexpected header '" + line + "'");
      continue;
    }
    if (cells.size() != header.size())
      throw FormatError("bleu rows line " + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                        " fields");
    BleuRow r{cells[0], cells[1], cells[2], parse_double(cells[3], no), {}, parse_double(cells.back(), no)};
    for (std::size_t c = 4; c + 1 < cells.size(); ++c) r.b.push_back(parse_double(cells[c], no));
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw FormatError("bleu rows: missing header");
  return rows;
}

std::vector<BleuRow> read_bleu_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_bleu_rows(in);
}

}  // namespace nmtadv
