#include "qidn/synthetic.hpp"

#include <algorithm>
#include <initializer_list>
#include <random>
#include <set>
#include <string>

namespace qidn::corpus {

namespace {

const std::vector<std::string> kPersons = {"alice", "bob",   "carol", "dave",    "erin", "frank",
                                           "grace", "heidi", "ivan",  "mallory", "judy", "oscar"};
const std::vector<std::string> kLocations = {"paris", "tokyo", "cairo", "lima", "oslo", "rome", "delhi", "quito"};
const std::vector<std::string> kOrgs = {"acme", "globex", "initech", "umbrella", "hooli", "vandelay", "stark", "wayne"};
const std::vector<std::string> kFunction = {"was", "in",  "for", "is",   "and", "who",   "which", "also",
                                            ".",   ",",   "the", "then", "now", "there", "later"};

enum class Kind { per, loc, org };

class Builder {
 public:
  explicit Builder(std::mt19937_64& rng) : rng_(rng) {}

  void words(std::initializer_list<const char*> ws) {
    for (const char* w : ws) s_.tokens.emplace_back(w);
  }

  Entity mention(Kind kind) {
    const auto& pool = kind == Kind::per ? kPersons : kind == Kind::loc ? kLocations : kOrgs;
    std::string name;
    do {
      name = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
    } while (used_.count(name));
    used_.insert(name);
    Entity e;
    e.start = s_.tokens.size();
    s_.tokens.push_back(name);
    const char* suffix = kind == Kind::per ? "jr" : kind == Kind::loc ? "city" : "corp";
    const double p_suffix = kind == Kind::per ? 0.2 : kind == Kind::loc ? 0.3 : 0.4;
    if (std::bernoulli_distribution(p_suffix)(rng_)) s_.tokens.emplace_back(suffix);
    e.end = s_.tokens.size() - 1;
    e.type = kind == Kind::per ? "PER" : kind == Kind::loc ? "LOC" : "ORG";
    s_.entities.push_back(e);
    return e;
  }

  void relate(const Entity& subject, const char* relation, const Entity& object) {
    s_.triples.push_back({subject, object, relation});
  }

  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  Sentence take() {
    dedupe_triples(s_.triples);
    return std::move(s_);
  }

 private:
  std::mt19937_64& rng_;
  Sentence s_;
  std::set<std::string> used_;
};

// Single-triple clauses.
void single_clause(Builder& b, int which) {
  switch (which) {
    case 0: {
      auto p = b.mention(Kind::per);
      b.words({"was", "born", "in"});
      b.relate(p, "born_in", b.mention(Kind::loc));
      break;
    }
    case 1: {
      auto p = b.mention(Kind::per);
      b.words({"lives", "in"});
      b.relate(p, "lives_in", b.mention(Kind::loc));
      break;
    }
    case 2: {
      auto p = b.mention(Kind::per);
      b.words({"works", "for"});
      if (b.coin(0.3)) b.words({"the"});
      b.relate(p, "works_for", b.mention(Kind::org));
      break;
    }
    default: {
      if (b.coin(0.5)) b.words({"the"});
      auto o = b.mention(Kind::org);
      b.words({"is", "based", "in"});
      b.relate(o, "based_in", b.mention(Kind::loc));
      break;
    }
  }
}

// Two triples sharing the ordered entity pair.
void epo_clause(Builder& b, int which) {
  auto p = b.mention(Kind::per);
  if (which == 0) {
    b.words({"was", "born", "and", "now", "lives", "in"});
    auto l = b.mention(Kind::loc);
    b.relate(p, "born_in", l);
    b.relate(p, "lives_in", l);
  } else {
    b.words({"was", "born", "in"});
    auto l = b.mention(Kind::loc);
    b.words({"and", "lives", "there"});
    b.relate(p, "born_in", l);
    b.relate(p, "lives_in", l);
  }
}

// Two triples sharing exactly one entity.
void seo_clause(Builder& b, int which) {
  switch (which) {
    case 0: {
      auto p = b.mention(Kind::per);
      b.words({"works", "for"});
      auto o = b.mention(Kind::org);
      b.words({",", "which", "is", "based", "in"});
      auto l = b.mention(Kind::loc);
      b.relate(p, "works_for", o);
      b.relate(o, "based_in", l);
      break;
    }
    case 1: {
      auto p = b.mention(Kind::per);
      b.words({"works", "for"});
      auto o = b.mention(Kind::org);
      b.words({"and", "lives", "in"});
      auto l = b.mention(Kind::loc);
      b.relate(p, "works_for", o);
      b.relate(p, "lives_in", l);
      break;
    }
    case 2: {
      auto p1 = b.mention(Kind::per);
      b.words({"lives", "in"});
      auto l = b.mention(Kind::loc);
      b.words({",", "and"});
      auto p2 = b.mention(Kind::per);
      b.words({"also", "lives", "there"});
      b.relate(p1, "lives_in", l);
      b.relate(p2, "lives_in", l);
      break;
    }
    case 3: {
      auto p1 = b.mention(Kind::per);
      b.words({"works", "for"});
      auto o = b.mention(Kind::org);
      b.words({",", "and"});
      auto p2 = b.mention(Kind::per);
      b.words({"also", "works", "there"});
      b.relate(p1, "works_for", o);
      b.relate(p2, "works_for", o);
      break;
    }
    default: {
      auto p = b.mention(Kind::per);
      b.words({",", "who", "was", "born", "in"});
      auto l = b.mention(Kind::loc);
      b.words({",", "works", "for"});
      auto o = b.mention(Kind::org);
      b.relate(p, "born_in", l);
      b.relate(p, "works_for", o);
      break;
    }
  }
}

void connector(Builder& b, int which) {
  switch (which) {
    case 0: b.words({"."}); break;
    case 1: b.words({"and", "then"}); break;
    default: b.words({",", "later"}); break;
  }
}

}  // namespace

const std::vector<std::string>& synthetic_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (const auto* pool : {&kPersons, &kLocations, &kOrgs}) v.insert(v.end(), pool->begin(), pool->end());
    v.insert(v.end(), {"jr", "city", "corp", "born", "lives", "works", "based"});
    v.insert(v.end(), kFunction.begin(), kFunction.end());
    return v;
  }();
  return vocab;
}

LabelSet synthetic_labels() { return {{"LOC", "ORG", "PER"}, {"based_in", "born_in", "lives_in", "works_for"}}; }

std::vector<Sentence> generate_synthetic(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  std::vector<Sentence> out;
  out.reserve(options.sentences);
  for (std::size_t i = 0; i < options.sentences; ++i) {
    Builder b(rng);
    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (r < 0.35) {
      single_clause(b, pick(4));
    } else if (r < 0.75) {
      const double g = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (g < 0.3) {
        epo_clause(b, pick(2));
      } else if (g < 0.75) {
        seo_clause(b, pick(5));
      } else {
        single_clause(b, pick(4));
        connector(b, pick(3));
        single_clause(b, pick(4));
      }
    } else {
      const double g = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (g < 0.2) {
        single_clause(b, pick(4));
        connector(b, pick(3));
        single_clause(b, pick(4));
        connector(b, pick(3));
        single_clause(b, pick(4));
      } else {
        const bool group_first = b.coin(0.5);
        auto group = [&] {
          if (b.coin(0.35)) {
            epo_clause(b, pick(2));
          } else {
            seo_clause(b, pick(5));
          }
        };
        if (group_first) group(); else single_clause(b, pick(4));
        connector(b, pick(3));
        if (group_first) single_clause(b, pick(4)); else group();
      }
    }
    b.words({"."});
    out.push_back(b.take());
  }
  return out;
}

}  // namespace qidn::corpus
