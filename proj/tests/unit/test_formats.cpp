#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "retts/checkpoint.hpp"
#include "retts/config.hpp"
#include "retts/error.hpp"
#include "retts/gradcheck_suite.hpp"
#include "retts/matrix_io.hpp"
#include "retts/rng.hpp"
#include "tempdir.hpp"

using namespace retts;
using retts::testing::TempDir;

TEST(MatrixIo, RoundTripF64) {
  RngStream rng(1, "io");
  const Tensor t = rng_normal(rng, {5, 3});
  const auto bytes = encode_matrix(t.shape(), t.data());
  std::size_t offset = 0;
  const Tensor back = decode_matrix(bytes, offset);
  EXPECT_EQ(offset, bytes.size());
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(back.to_vector(), t.to_vector());
}

TEST(MatrixIo, F32RoundsOnce) {
  const Tensor t = Tensor::from({2}, {0.1, -3.75});
  const auto bytes = encode_matrix(t.shape(), t.data(), Dtype::F32);
  std::size_t offset = 0;
  const Tensor back = decode_matrix(bytes, offset);
  EXPECT_EQ(back.at(0), static_cast<double>(0.1f));
  EXPECT_EQ(back.at(1), -3.75);
}

TEST(MatrixIo, ZeroExtentRejected) {
  EXPECT_THROW(encode_matrix({0, 4}, {}), FormatError);
  EXPECT_THROW(encode_matrix({2}, std::vector<double>{1.0, std::nan("")}), NumericError);
}

TEST(MatrixIo, TruncationIsFormatError) {
  const Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto bytes = encode_matrix(t.shape(), t.data());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    std::size_t offset = 0;
    EXPECT_THROW(decode_matrix(part, offset), FormatError) << cut;
  }
  bytes[0] = 'X';
  std::size_t offset = 0;
  EXPECT_THROW(decode_matrix(bytes, offset), FormatError);
}

TEST(MatrixIo, FileRoundTrip) {
  TempDir dir("matrix");
  const Tensor t = Tensor::from({1, 3}, {1.5, 2.5, -0.25});
  save_matrix(dir / "a.mel", t);
  EXPECT_EQ(load_matrix(dir / "a.mel").to_vector(), t.to_vector());
  EXPECT_THROW(load_matrix(dir / "missing.mel"), IoError);
}

TEST(Config, FormatParseRoundTrip) {
  RunConfig c;
  c.model.d_model = 24;
  c.train.stage1_lr = 0.0123456789012345;
  c.train.disc_channels = {3, 5};
  c.train.duration_source = DurationSource::Oracle;
  EXPECT_EQ(parse_config(format_config(c)), c);
  const std::string text = format_config(c);
  EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST(Config, CommentsAndBlanks) {
  const RunConfig c = parse_config("# comment\n\n d_model = 16 \nbatch_size=4 # trailing\n");
  EXPECT_EQ(c.model.d_model, 16u);
  EXPECT_EQ(c.train.batch_size, 4u);
}

TEST(Config, UnknownKeyNamesTheLine) {
  try {
    parse_config("d_model=8\nbogus=1\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("d_model=eight\n"), InputError);
  EXPECT_THROW(parse_config("duration_source=guess\n"), InputError);
  EXPECT_THROW(parse_config("no equals sign\n"), InputError);
}

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.config.model = gradcheck_toy_config();
  ck.stage = 1;
  ck.step = 17;
  ck.seed = 99;
  ck.rng = {{"mask", 5}, {"dropout", 123}, {"chunk", 0}};
  const Model model(ck.config.model, 3);
  for (const auto& p : model.parameters()) ck.model.push_back({p.name, p.tensor.clone()});
  ck.model_optimizer.step = 17;
  for (const auto& p : ck.model) {
    LambSlot slot;
    slot.m.assign(p.tensor.numel(), 0.25);
    slot.v.assign(p.tensor.numel(), 1e-3);
    ck.model_optimizer.slots.push_back(slot);
  }
  return ck;
}

}  // namespace

TEST(CheckpointFormat, SaveLoadSaveIsByteIdentical) {
  TempDir dir("ckpt");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir / "a.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(dir / "b.ckpt", back);
  EXPECT_EQ(read_file_bytes(dir / "a.ckpt"), read_file_bytes(dir / "b.ckpt"));
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.rng, ck.rng);
  EXPECT_EQ(back.model_optimizer, ck.model_optimizer);
  ASSERT_EQ(back.model.size(), ck.model.size());
  for (std::size_t i = 0; i < ck.model.size(); ++i) {
    EXPECT_EQ(back.model[i].name, ck.model[i].name);
    EXPECT_EQ(back.model[i].tensor.to_vector(), ck.model[i].tensor.to_vector());
  }
}

TEST(CheckpointFormat, CorruptionIsDetected) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
  bytes = encode_checkpoint(sample_checkpoint());
  bytes.resize(bytes.size() - 5);
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(CheckpointFormat, ModelFromCheckpointRestoresValues) {
  const Checkpoint ck = sample_checkpoint();
  const Model model = model_from_checkpoint(ck);
  const auto params = model.parameters();
  ASSERT_EQ(params.size(), ck.model.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(params[i].tensor.to_vector(), ck.model[i].tensor.to_vector());
  }
}

TEST(CheckpointFormat, MismatchedConfigIsRejected) {
  TempDir dir("ckpt");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir / "a.ckpt", ck);
  ModelConfig other = ck.config.model;
  other.d_model = 16;
  try {
    load_checkpoint(dir / "a.ckpt", other);
    FAIL();
  } catch (const CompatibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("d_model"), std::string::npos) << e.what();
  }
}

TEST(CheckpointFormat, ApplyParametersIsAllOrNothing) {
  const Checkpoint ck = sample_checkpoint();
  ModelConfig other_cfg = ck.config.model;
  other_cfg.d_model = 16;
  const Model target(ck.config.model, 8);
  const Model other(other_cfg, 8);
  const auto before = target.parameters();
  std::vector<std::vector<double>> snapshot;
  for (const auto& p : before) snapshot.push_back(p.tensor.to_vector());
  EXPECT_THROW(apply_parameters(other.parameters(), target.parameters()), CompatibilityError);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].tensor.to_vector(), snapshot[i]);
}
