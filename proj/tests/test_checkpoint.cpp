// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "robustnmt/checkpoint.hpp"
#include "robustnmt/error.hpp"
#include "robustnmt/rng.hpp"
#include "support/tmpdir.hpp"

using namespace robustnmt;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.src_vocab = 9;
  cfg.tgt_vocab = 8;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  return cfg;
}

CheckpointData sample_data(bool with_dis) {
  CheckpointData data;
  data.step = 17;
  data.config = small_config();
  RngStream mr("model", 7);
  data.model = ModelParams::init(data.config, mr);
  if (with_dis) {
    data.has_discriminator = true;
    RngStream dr("dis", 7);
    data.dis = DiscriminatorParams::init(data.config.hidden_dim, 2, dr);
    // Make the zero-initialized output layer distinguishable on reload.
    data.dis.out_w.values()[0] = 0.25;
  }
  data.adam_t = 5;
  AdamSlot slot;
  const std::size_t n = data.model.src_embed.values().size();
  for (std::size_t i = 0; i < n; ++i) {
    slot.m.push_back(0.01 * static_cast<double>(i) - 0.1);
    slot.v.push_back(0.001 * static_cast<double>(i + 1));
  }
  data.adam_slots["src_embed"] = slot;
  return data;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void check_tensors_equal(const std::vector<NamedTensor>& a,
                         const std::vector<NamedTensor>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    const auto& va = a[i].tensor.values();
    const auto& vb = b[i].tensor.values();
    REQUIRE(va.size() == vb.size());
    for (std::size_t j = 0; j < va.size(); ++j) {
      CHECK_MESSAGE(va[j] == vb[j], a[i].name, " element ", j);
    }
  }
}

}  // namespace

TEST_CASE("checkpoint round trip restores every field bitwise") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");

  CheckpointData data = sample_data(true);
  save_checkpoint(data, path);
  CheckpointData back = load_checkpoint(path);

  CHECK(back.step == 17);
  CHECK(back.config.src_vocab == data.config.src_vocab);
  CHECK(back.config.tgt_vocab == data.config.tgt_vocab);
  CHECK(back.config.embed_dim == data.config.embed_dim);
  CHECK(back.config.hidden_dim == data.config.hidden_dim);
  CHECK(back.has_discriminator);
  CHECK(back.adam_t == 5);

  check_tensors_equal(data.model.all(), back.model.all());
  check_tensors_equal(data.dis.group(), back.dis.group());

  REQUIRE(back.adam_slots.count("src_embed") == 1);
  const AdamSlot& slot = back.adam_slots.at("src_embed");
  CHECK(slot.m == data.adam_slots.at("src_embed").m);
  CHECK(slot.v == data.adam_slots.at("src_embed").v);
}

TEST_CASE("checkpoint without discriminator round-trips") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("mle.ckpt");

  CheckpointData data = sample_data(false);
  save_checkpoint(data, path);
  CheckpointData back = load_checkpoint(path);

  CHECK_FALSE(back.has_discriminator);
  check_tensors_equal(data.model.all(), back.model.all());
}

TEST_CASE("checkpoint writes are atomic: no temp file survives") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(false), path);
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("corrupted magic is rejected with the file named") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(true), path);

  std::string bytes = read_file(path);
  bytes[0] = 'X';
  write_file(path, bytes);

  try {
    load_checkpoint(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(path) != std::string::npos);
  }
}

TEST_CASE("unsupported version is rejected") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(false), path);

  std::string bytes = read_file(path);
  bytes[8] = 99;  // version field follows the 8-byte magic
  write_file(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("truncated payload is rejected") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(true), path);

  std::string bytes = read_file(path);
  write_file(path, bytes.substr(0, bytes.size() - 16));
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("trailing garbage is rejected") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(false), path);

  std::string bytes = read_file(path) + std::string(8, '\0');
  write_file(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("header and payload disagreeing on shapes is rejected") {
  testsupport::TmpDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(sample_data(false), path);

  // Grow one dimension in the stored config; the tensor bytes no longer
  // match the shapes the rebuilt model expects.
  std::string bytes = read_file(path);
  const std::string before = "\"src_vocab\":9";
  const std::string after = "\"src_vocab\":8";
  const auto pos = bytes.find(before);
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, before.size(), after);
  write_file(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("missing file and unwritable target raise DataError") {
  testsupport::TmpDir tmp;
  CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.ckpt")), DataError);
  CHECK_THROWS_AS(save_checkpoint(sample_data(false), "/dev/null/nope/x.ckpt"),
                  DataError);
}
