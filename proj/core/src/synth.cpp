#include "granorm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "granorm/corpus.hpp"
#include "granorm/error.hpp"
#include "granorm/param_store.hpp"

namespace granorm {

const char* const kSynthGrammar =
    "root Stmt\n"
    "Stmt = UseId(token name) | UseKw(Kw k)\n"
    "Kw = A() | B()\n";

void SynthSpec::validate() const {
  if (identifier_pool < 10) throw Error("synth: identifier pool must hold at least 10 tokens");
  if (!(branch_prior > 0.0 && branch_prior < 1.0)) throw Error("synth: branch_prior must lie in (0, 1)");
  if (!(noise >= 0.0 && noise < 1.0)) throw Error("synth: noise must lie in [0, 1)");
  if (!(held_out >= 0.0 && held_out < 1.0)) throw Error("synth: held_out must lie in [0, 1)");
  if (!(rare_cue >= 0.0 && rare_cue < 1.0)) throw Error("synth: rare_cue must lie in [0, 1)");
  if (!(zipf >= 0.0)) throw Error("synth: zipf must be non-negative");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"n_train", n_train},       {"n_dev", n_dev}, {"n_test", n_test},       {"identifier_pool", identifier_pool},
          {"branch_prior", branch_prior}, {"noise", noise}, {"held_out", held_out}, {"zipf", zipf}, {"rare_cue", rare_cue}, {"seed", seed}};
}

namespace {

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  std::size_t weighted(const std::vector<double>& cumulative) {
    double u = uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(cumulative.size() - 1, static_cast<std::size_t>(it - cumulative.begin()));
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 rng_;
};

const std::vector<std::string> kVerbs = {"use", "get", "show", "take", "find"};
constexpr std::size_t kFillers = 1000;

std::string quote(const std::string& tok) {
  std::string out = "\"";
  for (char c : tok) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

struct Pool {
  std::vector<std::string> ids;
  std::vector<double> cumulative;  // Zipf weight by position in ids
};

Pool make_pool(const std::vector<std::size_t>& ranks, double exponent) {
  Pool p;
  double acc = 0.0;
  for (std::size_t r : ranks) {
    p.ids.push_back(numbered("id", r, 2));
    p.cumulative.push_back(acc += std::pow(static_cast<double>(p.ids.size()), -exponent));
  }
  return p;
}

// Held-out ids (uniform) replace a kept id (Zipf) with probability `unseen`.
std::string draw_id(const Pool& kept, const Pool& held, double unseen, Draw& draw) {
  if (!held.ids.empty() && draw.uniform() < unseen) return draw.pick(held.ids);
  return kept.ids[draw.weighted(kept.cumulative)];
}

std::vector<SynthLine> gen_split(const SynthSpec& spec, std::size_t n, const Pool& kept, const Pool& held,
                                 double unseen, Draw& draw) {
  std::vector<SynthLine> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SynthLine line;
    line.src.push_back(draw.pick(kVerbs));
    if (draw.uniform() < spec.branch_prior) {
      std::string id = draw_id(kept, held, unseen, draw);
      line.src.push_back(id);
      line.tgt = "(UseId (tok " + quote(id) + "))";
    } else {
      bool a = draw.uniform() < 0.5;
      if (draw.uniform() < spec.rare_cue) line.src.push_back(numbered(a ? "alpha" : "beta", draw.below(kFillers), 3));
      else line.src.push_back(a ? "alpha" : "beta");
      line.tgt = a ? "(UseKw (A))" : "(UseKw (B))";
    }
    for (int slot = 0; slot < 2; ++slot) {
      if (draw.uniform() >= spec.noise) continue;
      if (draw.uniform() < 0.5) line.src.push_back(draw_id(kept, held, unseen, draw));
      else line.src.push_back(numbered("w", draw.below(kFillers), 3));
    }
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace

SynthDataset gen_label_bias_dataset(const SynthSpec& spec) {
  spec.validate();
  Draw draw(derive_seed(spec.seed, "synth"));

  // A random subset of the pool is held out; kept ids get Zipf weights by rank.
  std::vector<std::size_t> order(spec.identifier_pool);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  draw.shuffle(order);
  auto n_held = static_cast<std::size_t>(std::llround(spec.held_out * static_cast<double>(order.size())));
  std::vector<std::size_t> held(order.end() - static_cast<std::ptrdiff_t>(n_held), order.end());
  std::vector<std::size_t> kept(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_held));
  std::sort(held.begin(), held.end());
  std::sort(kept.begin(), kept.end());

  Pool kept_pool = make_pool(kept, spec.zipf);
  Pool held_pool = make_pool(held, 0.0);

  SynthDataset ds;
  ds.train_identifiers = kept_pool.ids;
  ds.held_out_identifiers = held_pool.ids;
  ds.train = gen_split(spec, spec.n_train, kept_pool, held_pool, 0.0, draw);
  ds.dev = gen_split(spec, spec.n_dev, kept_pool, held_pool, spec.held_out, draw);
  ds.test = gen_split(spec, spec.n_test, kept_pool, held_pool, spec.held_out, draw);
  return ds;
}

void write_synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir) {
  SynthDataset ds = gen_label_bias_dataset(spec);
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::vector<SynthLine>& lines) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    for (const auto& l : lines) out << to_jsonl_line(l.src, l.tgt) << '\n';
  };
  write("train.jsonl", ds.train);
  write("dev.jsonl", ds.dev);
  write("test.jsonl", ds.test);

  std::ofstream g(dir / "grammar.txt", std::ios::binary);
  g << kSynthGrammar;

  nlohmann::json meta = spec.to_json();
  meta["grammar"] = kSynthGrammar;
  meta["train_identifiers"] = ds.train_identifiers;
  meta["held_out_identifiers"] = ds.held_out_identifiers;
  std::ofstream m(dir / "meta.json", std::ios::binary);
  m << meta.dump(2) << '\n';
}

}  // namespace granorm
