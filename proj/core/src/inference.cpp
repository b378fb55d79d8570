#include "retts/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

Tensor generate_full(const Model& model, const PhonemeSequence& text, const ReferenceFeature& reference) {
  if (text.size() == 0) throw InputError("generate_full: empty text");
  NoGradGuard guard;
  const auto global = model.encode_global_factors(reference);
  const Tensor encoded = model.encode_phonemes(text, global);
  const auto adapted = model.variance_adapt(encoded, {AdaptMode::Infer, nullptr, nullptr, nullptr}, {});
  return model.decode_mel(adapted.frames, global);
}

void InsertionRequest::validate() const {
  if (insert_begin > insert_end || insert_end > new_text.size()) {
    throw InputError("insertion range [" + std::to_string(insert_begin) + ", " + std::to_string(insert_end) +
                     ") is outside the new text of " + std::to_string(new_text.size()) + " phonemes");
  }
  if (new_text.size() - (insert_end - insert_begin) != original_text.size()) {
    throw InputError("new text minus the insertion range does not have the original length");
  }
  for (std::size_t i = 0; i < original_text.size(); ++i) {
    const std::size_t j = i < insert_begin ? i : i + (insert_end - insert_begin);
    if (new_text.ids[j] != original_text.ids[i]) {
      throw InputError("new text differs from the original outside the insertion range at phoneme " +
                       std::to_string(j));
    }
  }
  if (original_prosody.size() != original_text.size() || original_prosody.pitch.size() != original_text.size() ||
      original_prosody.energy.size() != original_text.size()) {
    throw InputError("original prosody length differs from the original text");
  }
  if (!original_mel.defined() || original_mel.rank() != 2 ||
      static_cast<long>(original_mel.dim(0)) != original_prosody.total_frames()) {
    throw InputError("original mel frame count differs from the summed original durations");
  }
}

std::string SplicePlan::format() const {
  return "left " + std::to_string(left_frames) + "\ninsert " + std::to_string(insert_frames) + "\nright " +
         std::to_string(right_frames) + "\n";
}

SplicePlan SplicePlan::parse(const std::string& text) {
  std::istringstream in(text);
  SplicePlan plan;
  std::string key;
  std::size_t value = 0;
  int seen = 0;
  while (in >> key >> value) {
    if (key == "left") plan.left_frames = value, seen |= 1;
    else if (key == "insert") plan.insert_frames = value, seen |= 2;
    else if (key == "right") plan.right_frames = value, seen |= 4;
    else throw FormatError("splice plan: unknown field '" + key + "'");
  }
  if (seen != 7 || !in.eof()) throw FormatError("splice plan: expected left, insert and right counts");
  return plan;
}

InsertionRequest make_insertion(const Tensor& original_mel, const PhonemeSequence& original_text,
                                const ProsodyTrack& original_prosody, const ReferenceFeature& reference,
                                std::size_t at_word, const std::vector<std::vector<int>>& words) {
  const std::size_t n_words = original_text.word_count();
  if (at_word > n_words) {
    throw InputError("insertion word " + std::to_string(at_word) + " is past the end of a " +
                     std::to_string(n_words) + "-word sentence");
  }
  InsertionRequest req;
  req.original_mel = original_mel;
  req.original_text = original_text;
  req.original_prosody = original_prosody;
  req.reference = reference;

  const std::size_t split = at_word == n_words ? original_text.size() : original_text.word_span(at_word, at_word).first;
  const int added = static_cast<int>(words.size());
  for (std::size_t i = 0; i < split; ++i) {
    req.new_text.ids.push_back(original_text.ids[i]);
    req.new_text.word_index.push_back(original_text.word_index[i]);
  }
  req.insert_begin = req.new_text.size();
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].empty()) throw InputError("inserted word " + std::to_string(w) + " has no phonemes");
    for (int id : words[w]) {
      req.new_text.ids.push_back(id);
      req.new_text.word_index.push_back(static_cast<int>(at_word + w));
    }
  }
  req.insert_end = req.new_text.size();
  for (std::size_t i = split; i < original_text.size(); ++i) {
    req.new_text.ids.push_back(original_text.ids[i]);
    req.new_text.word_index.push_back(original_text.word_index[i] + added);
  }
  return req;
}

InsertionResult insert_words(const Model& model, const InsertionRequest& request) {
  request.validate();
  request.new_text.validate(model.config().phoneme_vocab);
  const std::size_t begin = request.insert_begin;
  const std::size_t end = request.insert_end;
  const std::size_t t0 = request.original_mel.dim(0);

  InsertionResult result;
  std::size_t left = 0;
  for (std::size_t i = 0; i < begin; ++i) left += static_cast<std::size_t>(request.original_prosody.duration[i]);
  result.plan = {left, 0, t0 - left};
  if (begin == end) {
    result.full_mel = request.original_mel;
    return result;
  }

  const std::size_t n = request.new_text.size();
  const std::size_t width = end - begin;
  ProsodyTrack teacher;
  std::vector<bool> predict(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    if (j >= begin && j < end) {
      teacher.duration.push_back(0);
      teacher.pitch.push_back(0.0);
      teacher.energy.push_back(0.0);
      predict[j] = true;
      continue;
    }
    const std::size_t i = j < begin ? j : j - width;
    teacher.duration.push_back(request.original_prosody.duration[i]);
    teacher.pitch.push_back(request.original_prosody.pitch[i]);
    teacher.energy.push_back(request.original_prosody.energy[i]);
  }
  const ProsodyContext context = ProsodyContext::from_track(teacher, predict);

  NoGradGuard guard;
  const auto global = model.encode_global_factors(request.reference);
  const Tensor encoded = model.encode_phonemes(request.new_text, global);
  const auto adapted = model.variance_adapt(encoded, {AdaptMode::Infer, &context, &teacher, &predict}, {});
  const Tensor generated = model.decode_mel(adapted.frames, global);

  std::size_t inserted = 0;
  for (std::size_t j = begin; j < end; ++j) inserted += static_cast<std::size_t>(adapted.durations[j]);
  result.plan.insert_frames = inserted;
  if (inserted > 0) result.segment = slice_rows(generated, left, left + inserted).detach();
  result.full_mel = splice(request.original_mel, result.segment, result.plan);
  return result;
}

Tensor splice(const Tensor& original, const Tensor& segment, const SplicePlan& plan) {
  if (!original.defined() || original.rank() != 2) throw InputError("splice: original must be a matrix");
  const std::size_t t0 = original.dim(0);
  const std::size_t cols = original.dim(1);
  if (plan.left_frames + plan.right_frames != t0) {
    throw InputError("splice: plan keeps " + std::to_string(plan.left_frames + plan.right_frames) +
                     " original frames but the original has " + std::to_string(t0));
  }
  const std::size_t seg_rows = segment.defined() ? segment.dim(0) : 0;
  if (seg_rows != plan.insert_frames || (segment.defined() && (segment.rank() != 2 || segment.dim(1) != cols))) {
    throw InputError("splice: segment shape does not match the plan");
  }
  if (plan.insert_frames == 0) return original.detach();

  const auto src = original.data();
  const auto seg = segment.data();
  std::vector<double> out;
  out.reserve((t0 + seg_rows) * cols);
  out.insert(out.end(), src.begin(), src.begin() + static_cast<std::ptrdiff_t>(plan.left_frames * cols));
  out.insert(out.end(), seg.begin(), seg.end());
  out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(plan.left_frames * cols), src.end());
  return Tensor::from({t0 + seg_rows, cols}, std::move(out));
}

std::vector<double> pooled_global_tokens(const Model& model, const ReferenceFeature& reference) {
  NoGradGuard guard;
  const Tensor tokens = model.encode_global_factors(reference).tokens;
  const std::size_t m = tokens.dim(0);
  const std::size_t d = tokens.dim(1);
  std::vector<double> pooled(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < d; ++k) pooled[k] += tokens.at(i, k) / static_cast<double>(m);
  }
  return pooled;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

SpeakerSimilarity speaker_similarity(const Model& model, const Corpus& corpus) {
  const std::size_t n = corpus.utterances.size();
  std::vector<std::vector<double>> pooled;
  for (const auto& u : corpus.utterances) pooled.push_back(pooled_global_tokens(model, u.reference));
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sim[i * n + j] = cosine(pooled[i], pooled[j]);
  }

  SpeakerSimilarity out;
  std::size_t within = 0, across = 0, separated = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const bool same = corpus.utterances[a].speaker == corpus.utterances[b].speaker;
      if (a < b) {
        (same ? out.within_mean : out.across_mean) += sim[a * n + b];
        ++(same ? within : across);
      }
      if (!same) continue;
      for (std::size_t c = 0; c < n; ++c) {
        if (corpus.utterances[c].speaker == corpus.utterances[a].speaker) continue;
        ++out.triples;
        if (sim[a * n + b] > sim[a * n + c]) ++separated;
      }
    }
  }
  if (within) out.within_mean /= static_cast<double>(within);
  if (across) out.across_mean /= static_cast<double>(across);
  if (out.triples) out.separated_fraction = static_cast<double>(separated) / static_cast<double>(out.triples);
  return out;
}

}  // namespace retts
