#pragma once

// Helpers shared by the unit and acceptance suites: scratch directories,
// subprocess runs, random fixtures and exhaustive oracles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gtexpand/model.hpp"

namespace gtexpand::testing {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(GTEXPAND_FIXTURE_DIR) / rel; }
inline std::string cli_path() { return GTEXPAND_CLI_PATH; }

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    for (;;) {
      path_ = fs::temp_directory_path() / ("gtexpand-test-" + std::to_string(rng()));
      if (fs::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline CommandResult run_cli(const std::vector<std::string>& args) {
  std::string cmd = shell_quote(cli_path());
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " 2>&1";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// ---------------------------------------------------------------------------
// Random fixtures over a small vocabulary so collisions are frequent.

inline Quadruple quad(const std::string& a, const std::string& c, const std::string& s, const std::string& o) {
  return make_quadruple(a, c, s, o, Taxonomy::restaurant());
}

inline Quadruple random_quad(std::mt19937_64& rng, int vocab = 3) {
  static const std::vector<std::string> aspects{"steak", "9 oz steak", "service", "null", "wine list", "place"};
  static const std::vector<std::string> opinions{"good", "not worth", "n't worth", "slow", "null", "great"};
  static const std::vector<std::string> cats{"food quality", "service general", "drinks prices"};
  static const std::vector<std::string> sents{"positive", "negative", "neutral"};
  auto pick = [&](const std::vector<std::string>& v, int cap) {
    const std::size_t bound = std::min<std::size_t>(v.size(), static_cast<std::size_t>(cap));
    return v[std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng)];
  };
  return quad(pick(aspects, vocab + 1), pick(cats, 2), pick(sents, 2), pick(opinions, vocab + 1));
}

/// A group whose variants share the original's category and sentiment.
inline GtGroup random_group(std::mt19937_64& rng, std::size_t max_variants, int vocab = 3) {
  const Quadruple original = random_quad(rng, vocab);
  std::vector<Variant> variants{Variant{original}};
  std::set<Quadruple> seen{original};
  const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, max_variants - 1)(rng);
  for (std::size_t i = 0; i < extra; ++i) {
    Quadruple r = random_quad(rng, vocab);
    Quadruple v = original.with_term(Element::kAspect, r.aspect).with_term(Element::kOpinion, r.opinion);
    if (!seen.insert(v).second) continue;
    variants.push_back(Variant{v, Origin::kZoomIn, Origin::kZoomOut, Verdict::kValid, Verdict::kValid});
  }
  return GtGroup(original, std::move(variants));
}

/// Exhaustive maximum one-to-one assignment: every prediction tries every
/// compatible unused group, or stays unmatched.
inline std::size_t brute_force_tp(const std::vector<Quadruple>& preds, const std::vector<GtGroup>& groups) {
  std::vector<bool> used(groups.size(), false);
  std::size_t best = 0;
  auto rec = [&](auto&& self, std::size_t i, std::size_t matched) -> void {
    if (i == preds.size()) {
      best = std::max(best, matched);
      return;
    }
    self(self, i + 1, matched);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (used[g] || !groups[g].contains(preds[i])) continue;
      used[g] = true;
      self(self, i + 1, matched + 1);
      used[g] = false;
    }
  };
  rec(rec, 0, 0);
  return best;
}

/// Pearson correlation by its textbook definition.
inline double pearson(const std::vector<int>& x, const std::vector<int>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Kendall tau-b by pairwise enumeration.
inline double brute_force_tau_b(const std::vector<int>& x, const std::vector<int>& y) {
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) ties_x += 1;
      else if (dy == 0) ties_y += 1;
      else if ((dx > 0) == (dy > 0)) concordant += 1;
      else discordant += 1;
    }
  }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
}

/// Fleiss' kappa from per-item category counts, written straight from the
/// textbook definitions of P_i, P-bar and P-bar_e.
inline double fleiss_by_hand(const std::vector<std::array<int, 2>>& counts) {
  const double N = static_cast<double>(counts.size());
  const double n = counts[0][0] + counts[0][1];
  double p_bar = 0;
  std::array<double, 2> p_j{0, 0};
  for (const auto& row : counts) {
    double agree = 0;
    for (int j = 0; j < 2; ++j) {
      agree += row[j] * (row[j] - 1.0);
      p_j[j] += row[j];
    }
    p_bar += agree / (n * (n - 1));
  }
  p_bar /= N;
  double pe = 0;
  for (int j = 0; j < 2; ++j) {
    const double pj = p_j[j] / (N * n);
    pe += pj * pj;
  }
  return (p_bar - pe) / (1 - pe);
}

}  // namespace gtexpand::testing
