#include "retts/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "retts/error.hpp"
#include "retts/matrix_io.hpp"
#include "retts/rng.hpp"

namespace retts {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::logic_error&) {
      throw FormatError("bad number '" + part + "'");
    }
  }
  return out;
}

std::string utt_id(std::size_t speaker, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%02zu_u%03zu", speaker, index);
  return buf;
}

std::string stream_suffix(std::size_t speaker, std::size_t index) {
  return std::to_string(speaker) + ":" + std::to_string(index);
}

// Frame t of the utterance belongs to phoneme owner[t].
std::vector<std::size_t> frame_owner(const ProsodyTrack& prosody) {
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < prosody.size(); ++i) {
    for (int k = 0; k < prosody.duration[i]; ++k) owner.push_back(i);
  }
  return owner;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

Tensor prosody_matrix(const ProsodyTrack& p) {
  std::vector<double> values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    values.push_back(p.duration[i]);
    values.push_back(p.pitch[i]);
    values.push_back(p.energy[i]);
  }
  return Tensor::from({p.size(), 3}, values);
}

ProsodyTrack prosody_from_matrix(const Tensor& m) {
  if (m.rank() != 2 || m.dim(1) != 3) throw FormatError("prosody matrix must be [N, 3]");
  ProsodyTrack p;
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    const double d = m.at(i, 0);
    if (d < 0 || d != std::floor(d)) throw FormatError("prosody duration is not a count");
    p.duration.push_back(static_cast<int>(d));
    p.pitch.push_back(m.at(i, 1));
    p.energy.push_back(m.at(i, 2));
  }
  return p;
}

Tensor frames_matrix(const FrameProsody& f) {
  std::vector<double> values;
  for (std::size_t t = 0; t < f.pitch.size(); ++t) {
    values.push_back(f.pitch[t]);
    values.push_back(f.energy[t]);
  }
  return Tensor::from({f.pitch.size(), 2}, values);
}

FrameProsody frames_from_matrix(const Tensor& m) {
  if (m.rank() != 2 || m.dim(1) != 2) throw FormatError("frame prosody matrix must be [T, 2]");
  FrameProsody f;
  for (std::size_t t = 0; t < m.dim(0); ++t) {
    f.pitch.push_back(m.at(t, 0));
    f.energy.push_back(m.at(t, 1));
  }
  return f;
}

}  // namespace

SyntheticWorld SyntheticWorld::create(const CorpusSpec& spec) {
  RngStream rng(spec.seed, "world");
  SyntheticWorld w;
  for (std::size_t p = 0; p < spec.phoneme_vocab; ++p) {
    std::vector<double> tmpl(spec.n_mels);
    for (double& v : tmpl) v = rng.normal();
    w.templates.push_back(std::move(tmpl));
    w.base_duration.push_back(2.0 + static_cast<double>(rng.uniform_int(5)));
    w.pitch_offset.push_back(0.5 * rng.normal());
    w.energy_offset.push_back(0.3 * rng.normal());
    std::vector<double> content(spec.feature_dim);
    for (double& v : content) v = rng.normal();
    w.content.push_back(std::move(content));
  }
  for (std::size_t k = 0; k < spec.n_mels; ++k) {
    w.pitch_profile.push_back(std::cos(M_PI * static_cast<double>(k) / static_cast<double>(spec.n_mels)));
  }
  return w;
}

SyntheticSpeaker make_speaker(const CorpusSpec& spec, std::size_t id) {
  RngStream rng(spec.seed, "speaker:" + std::to_string(id));
  SyntheticSpeaker s;
  s.id = id;
  s.base_pitch = 0.7 * rng.normal();
  s.tempo = 0.7 + 0.6 * rng.uniform();
  s.base_energy = 0.3 * rng.normal();
  s.timbre.resize(spec.n_mels);
  for (double& v : s.timbre) v = 1.0 + 0.5 * rng.normal();
  s.feature_basis.resize(spec.feature_dim);
  for (double& v : s.feature_basis) v = rng.normal();
  return s;
}

Tensor render_mel(const SyntheticWorld& world, const SyntheticSpeaker& speaker,
                  const PhonemeSequence& text, const ProsodyTrack& prosody, std::uint64_t seed,
                  const std::string& noise_stream) {
  const auto owner = frame_owner(prosody);
  if (owner.empty()) throw InputError("render_mel: utterance has no frames");
  const std::size_t n_mels = speaker.timbre.size();
  RngStream noise(seed, noise_stream);
  std::vector<double> values;
  values.reserve(owner.size() * n_mels);
  for (std::size_t i : owner) {
    const auto& tmpl = world.templates.at(static_cast<std::size_t>(text.ids[i]));
    for (std::size_t k = 0; k < n_mels; ++k) {
      values.push_back(speaker.timbre[k] * tmpl[k] + 0.5 * prosody.pitch[i] * world.pitch_profile[k] +
                       prosody.energy[i] + 0.05 * noise.normal());
    }
  }
  return Tensor::from({owner.size(), n_mels}, values);
}

ReferenceFeature render_reference(const SyntheticWorld& world, const SyntheticSpeaker& speaker,
                                  const PhonemeSequence& text, const ProsodyTrack& prosody,
                                  std::uint64_t seed, const std::string& noise_stream) {
  const auto owner = frame_owner(prosody);
  if (owner.empty()) throw InputError("render_reference: utterance has no frames");
  const std::size_t dim = speaker.feature_basis.size();
  const std::size_t frames = (owner.size() + 1) / 2;
  RngStream noise(seed, noise_stream);
  std::vector<double> values;
  values.reserve(frames * dim);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto& content = world.content.at(static_cast<std::size_t>(text.ids[owner[2 * f]]));
    for (std::size_t k = 0; k < dim; ++k) {
      values.push_back(speaker.feature_basis[k] + 0.3 * content[k] + 0.1 * noise.normal());
    }
  }
  return ReferenceFeature{Tensor::from({frames, dim}, values)};
}

Utterance make_utterance(const CorpusSpec& spec, const SyntheticWorld& world,
                         const SyntheticSpeaker& speaker, std::size_t index) {
  const std::string suffix = stream_suffix(speaker.id, index);
  RngStream rng(spec.seed, "utt:" + suffix);
  Utterance u;
  u.id = utt_id(speaker.id, index);
  u.speaker = speaker.id;

  const std::size_t words = spec.min_words + rng.uniform_int(spec.max_words - spec.min_words + 1);
  for (std::size_t w = 0; w < words; ++w) {
    const std::size_t len = 1 + rng.uniform_int(spec.max_word_phonemes);
    for (std::size_t k = 0; k < len; ++k) {
      u.text.ids.push_back(static_cast<int>(rng.uniform_int(spec.phoneme_vocab)));
      u.text.word_index.push_back(static_cast<int>(w));
    }
  }
  for (int id : u.text.ids) {
    const auto p = static_cast<std::size_t>(id);
    const double d = std::round(speaker.tempo * world.base_duration[p] + 0.5 * rng.normal());
    u.prosody.duration.push_back(static_cast<int>(std::max(1.0, d)));
    u.prosody.pitch.push_back(speaker.base_pitch + world.pitch_offset[p] + 0.1 * rng.normal());
    u.prosody.energy.push_back(speaker.base_energy + world.energy_offset[p] + 0.1 * rng.normal());
  }
  for (std::size_t i = 0; i < u.prosody.size(); ++i) {
    for (int k = 0; k < u.prosody.duration[i]; ++k) {
      u.frames.pitch.push_back(u.prosody.pitch[i]);
      u.frames.energy.push_back(u.prosody.energy[i]);
    }
  }
  u.mel = render_mel(world, speaker, u.text, u.prosody, spec.seed, "mel:" + suffix);
  u.reference = render_reference(world, speaker, u.text, u.prosody, spec.seed, "feat:" + suffix);
  return u;
}

Corpus gen_corpus(const CorpusSpec& spec) {
  if (spec.n_speakers == 0 || spec.utts_per_speaker == 0) {
    throw InputError("gen_corpus: speaker and utterance counts must be at least 1");
  }
  if (spec.min_words == 0 || spec.max_words < spec.min_words || spec.max_word_phonemes == 0) {
    throw InputError("gen_corpus: bad word length range");
  }
  Corpus corpus;
  corpus.spec = spec;
  const SyntheticWorld world = SyntheticWorld::create(spec);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) corpus.speakers.push_back(make_speaker(spec, s));
  for (const auto& speaker : corpus.speakers) {
    for (std::size_t u = 0; u < spec.utts_per_speaker; ++u) {
      corpus.utterances.push_back(make_utterance(spec, world, speaker, u));
    }
  }
  return corpus;
}

std::string format_phonemes(const PhonemeSequence& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i) out += (text.word_index[i] == text.word_index[i - 1]) ? ',' : ' ';
    out += std::to_string(text.ids[i]);
  }
  return out;
}

PhonemeSequence parse_phonemes(const std::string& text) {
  std::string flat = text;
  for (char& c : flat) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  PhonemeSequence seq;
  int word = 0;
  for (const auto& w : split(flat, ' ')) {
    if (w.empty()) continue;
    for (const auto& p : split(w, ',')) {
      try {
        std::size_t used = 0;
        const int id = std::stoi(p, &used);
        if (used != p.size() || id < 0) throw InputError("");
        seq.ids.push_back(id);
      } catch (const std::logic_error&) {
        throw InputError("bad phoneme id '" + p + "'");
      } catch (const InputError&) {
        throw InputError("bad phoneme id '" + p + "'");
      }
      seq.word_index.push_back(word);
    }
    ++word;
  }
  if (seq.ids.empty()) throw InputError("empty phoneme sequence");
  return seq;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "utts", ec);
  if (ec) throw IoError("cannot create " + (dir / "utts").string() + ": " + ec.message());
  const CorpusSpec& s = corpus.spec;

  std::string spec_text;
  spec_text += "n_speakers=" + std::to_string(s.n_speakers) + "\n";
  spec_text += "utts_per_speaker=" + std::to_string(s.utts_per_speaker) + "\n";
  spec_text += "seed=" + std::to_string(s.seed) + "\n";
  spec_text += "n_mels=" + std::to_string(s.n_mels) + "\n";
  spec_text += "phoneme_vocab=" + std::to_string(s.phoneme_vocab) + "\n";
  spec_text += "feature_dim=" + std::to_string(s.feature_dim) + "\n";
  spec_text += "min_words=" + std::to_string(s.min_words) + "\n";
  spec_text += "max_words=" + std::to_string(s.max_words) + "\n";
  spec_text += "max_word_phonemes=" + std::to_string(s.max_word_phonemes) + "\n";
  write_text(dir / "corpus.cfg", spec_text);

  std::string speakers = "# id\tbase_pitch\ttempo\tbase_energy\ttimbre\tfeature_basis\n";
  for (const auto& sp : corpus.speakers) {
    speakers += std::to_string(sp.id) + "\t" + fmt(sp.base_pitch) + "\t" + fmt(sp.tempo) + "\t" +
                fmt(sp.base_energy) + "\t" + join(sp.timbre) + "\t" + join(sp.feature_basis) + "\n";
  }
  write_text(dir / "speakers.tsv", speakers);

  std::string manifest = "# id\tspeaker\tphonemes\tmel\tfeature\tprosody\tframes\n";
  for (const auto& u : corpus.utterances) {
    const std::string stem = "utts/" + u.id;
    save_matrix(dir / (stem + ".mel"), u.mel);
    save_matrix(dir / (stem + ".feat"), u.reference.frames);
    save_matrix(dir / (stem + ".prosody"), prosody_matrix(u.prosody));
    save_matrix(dir / (stem + ".frames"), frames_matrix(u.frames));
    write_text(dir / (stem + ".phon"), format_phonemes(u.text) + "\n");
    manifest += u.id + "\t" + std::to_string(u.speaker) + "\t" + format_phonemes(u.text) + "\t" + stem +
                ".mel\t" + stem + ".feat\t" + stem + ".prosody\t" + stem + ".frames\n";
  }
  write_text(dir / "manifest.tsv", manifest);
}

namespace {

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path, std::size_t columns) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != columns) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(cols));
  }
  return rows;
}

Utterance load_utterance_files(const std::filesystem::path& mel, const std::filesystem::path& feat,
                               const std::filesystem::path& prosody, const std::filesystem::path& frames,
                               PhonemeSequence text) {
  Utterance u;
  u.text = std::move(text);
  u.mel = load_matrix(mel);
  u.reference.frames = load_matrix(feat);
  u.prosody = prosody_from_matrix(load_matrix(prosody));
  u.frames = frames_from_matrix(load_matrix(frames));
  if (u.prosody.size() != u.text.size()) throw FormatError(prosody.string() + ": length differs from text");
  if (u.prosody.total_frames() != static_cast<long>(u.mel.dim(0)) || u.frames.pitch.size() != u.mel.dim(0)) {
    throw FormatError(mel.string() + ": frame count differs from durations");
  }
  return u;
}

}  // namespace

Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  CorpusSpec& s = corpus.spec;
  {
    std::istringstream in(read_text(dir / "corpus.cfg"));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const auto value = std::stoull(line.substr(eq + 1));
      if (key == "n_speakers") s.n_speakers = value;
      else if (key == "utts_per_speaker") s.utts_per_speaker = value;
      else if (key == "seed") s.seed = value;
      else if (key == "n_mels") s.n_mels = value;
      else if (key == "phoneme_vocab") s.phoneme_vocab = value;
      else if (key == "feature_dim") s.feature_dim = value;
      else if (key == "min_words") s.min_words = value;
      else if (key == "max_words") s.max_words = value;
      else if (key == "max_word_phonemes") s.max_word_phonemes = value;
      else throw FormatError((dir / "corpus.cfg").string() + ": unknown key '" + key + "'");
    }
  }
  for (const auto& row : read_table(dir / "speakers.tsv", 6)) {
    SyntheticSpeaker sp;
    sp.id = std::stoull(row[0]);
    sp.base_pitch = std::stod(row[1]);
    sp.tempo = std::stod(row[2]);
    sp.base_energy = std::stod(row[3]);
    sp.timbre = parse_doubles(row[4]);
    sp.feature_basis = parse_doubles(row[5]);
    corpus.speakers.push_back(std::move(sp));
  }
  for (const auto& row : read_table(dir / "manifest.tsv", 7)) {
    Utterance u = load_utterance_files(dir / row[3], dir / row[4], dir / row[5], dir / row[6],
                                       parse_phonemes(row[2]));
    u.id = row[0];
    u.speaker = std::stoull(row[1]);
    if (u.speaker >= corpus.speakers.size()) throw FormatError("manifest: unknown speaker " + row[1]);
    u.text.validate(s.phoneme_vocab);
    corpus.utterances.push_back(std::move(u));
  }
  if (corpus.utterances.empty()) throw FormatError((dir / "manifest.tsv").string() + ": no utterances");
  return corpus;
}

Utterance read_utterance(const std::filesystem::path& mel_path) {
  auto sibling = [&](const char* ext) {
    auto p = mel_path;
    return p.replace_extension(ext);
  };
  Utterance u = load_utterance_files(mel_path, sibling(".feat"), sibling(".prosody"), sibling(".frames"),
                                     parse_phonemes(read_text(sibling(".phon"))));
  u.id = mel_path.stem().string();
  return u;
}

}  // namespace retts
