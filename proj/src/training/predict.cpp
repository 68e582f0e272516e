#include <algorithm>
#include <exception>
#include <thread>

#include "qidn/training.hpp"

namespace qidn::training {

namespace {

std::size_t argmax_row(const Tensor& t, std::size_t row, std::size_t first_col = 0) {
  std::size_t best = first_col;
  for (std::size_t c = first_col + 1; c < t.cols(); ++c) {
    if (t(row, c) > t(row, best)) best = c;
  }
  return best;
}

}  // namespace

std::vector<corpus::Triple> decode_triples(const heads::HeadOutputs& out, const corpus::Vocab& vocab) {
  std::vector<corpus::Triple> triples;
  const bool typed = out.subject_type_probs.has_value();
  for (std::size_t i = 0; i < out.type_probs.rows(); ++i) {
    const std::size_t relation = argmax_row(out.type_probs, i);
    if (relation == corpus::Vocab::kNull) continue;
    std::array<std::size_t, heads::kNumBoundaries> pos{};
    for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) pos[b] = argmax_row(out.boundary.probs[b], i);
    if (pos[heads::kSubjectLeft] > pos[heads::kSubjectRight] || pos[heads::kObjectLeft] > pos[heads::kObjectRight]) {
      continue;
    }
    corpus::Triple t;
    t.relation = vocab.relation_label(relation);
    t.subject = {pos[heads::kSubjectLeft], pos[heads::kSubjectRight], ""};
    t.object = {pos[heads::kObjectLeft], pos[heads::kObjectRight], ""};
    if (typed) {
      t.subject.type = vocab.entity_label(argmax_row(*out.subject_type_probs, i, 1));
      t.object.type = vocab.entity_label(argmax_row(*out.object_type_probs, i, 1));
    }
    triples.push_back(std::move(t));
  }
  corpus::dedupe_triples(triples);
  return triples;
}

std::vector<corpus::Triple> predict(const QidnModel& model, const corpus::Sentence& sentence) {
  num::NoGrad no_grad;
  const ForwardPass fp = model.forward(model.vocab().encode(sentence.tokens), num::DropoutContext{});
  return decode_triples(fp.heads, model.vocab());
}

evaluation::TripleSets predict_all(const QidnModel& model, const std::vector<corpus::Sentence>& sentences,
                                   std::size_t threads) {
  evaluation::TripleSets out(sentences.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, sentences.size()));
  if (workers == 1) {
    for (std::size_t s = 0; s < sentences.size(); ++s) out[s] = predict(model, sentences[s]);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t s = w; s < sentences.size(); s += workers) out[s] = predict(model, sentences[s]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace qidn::training
