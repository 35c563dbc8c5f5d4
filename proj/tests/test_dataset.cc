#include <gtest/gtest.h>

#include <unistd.h>
#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "pcnn/dataset.hpp"

using namespace pcnn;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = fs::temp_directory_path() /
           ("pcnn_dataset_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  ~TempDir() { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

 private:
  fs::path dir_;
};

void put_be32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> make_images(uint32_t count, uint32_t rows,
                                       uint32_t cols, uint32_t magic = 0x803) {
  std::vector<unsigned char> bytes;
  put_be32(bytes, magic);
  put_be32(bytes, count);
  put_be32(bytes, rows);
  put_be32(bytes, cols);
  for (uint32_t i = 0; i < count * rows * cols; ++i)
    bytes.push_back(static_cast<unsigned char>((i * 37 + 11) % 256));
  return bytes;
}

std::vector<unsigned char> make_labels(const std::vector<unsigned char>& v,
                                       uint32_t magic = 0x801) {
  std::vector<unsigned char> bytes;
  put_be32(bytes, magic);
  put_be32(bytes, static_cast<uint32_t>(v.size()));
  bytes.insert(bytes.end(), v.begin(), v.end());
  return bytes;
}

void write_raw(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_gz(const fs::path& p, const std::vector<unsigned char>& bytes) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  ASSERT_NE(f, nullptr);
  ASSERT_EQ(gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())),
            static_cast<int>(bytes.size()));
  gzclose(f);
}

}  // namespace

TEST(Dataset, LoadsRawIdxPair) {
  TempDir tmp;
  write_raw(tmp.path("imgs"), make_images(3, 2, 2));
  write_raw(tmp.path("lbls"), make_labels({1, 0, 9}));
  const Dataset d = load_idx_pair(tmp.path("imgs"), tmp.path("lbls"));
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.image_rows, 2);
  EXPECT_EQ(d.image_cols, 2);
  EXPECT_EQ(d.images.rows(), 4);
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0, 9}));
  // First pixel of first image is 11 -> 11/255.
  EXPECT_NEAR(d.images(0, 0), 11.0 / 255.0, 1e-12);
  EXPECT_GE(d.images.minCoeff(), 0.0);
  EXPECT_LE(d.images.maxCoeff(), 1.0);
}

TEST(Dataset, GzipRoundTripMatchesRaw) {
  TempDir tmp;
  const auto imgs = make_images(2, 3, 3);
  write_raw(tmp.path("plain"), imgs);
  write_gz(tmp.path("zipped.gz"), imgs);
  const Dataset a = load_idx_images(tmp.path("plain"));
  const Dataset b = load_idx_images(tmp.path("zipped.gz"));
  EXPECT_EQ((a.images - b.images).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dataset, RejectsWrongMagic) {
  TempDir tmp;
  write_raw(tmp.path("imgs"), make_images(1, 2, 2, /*magic=*/0x802));
  EXPECT_THROW(load_idx_images(tmp.path("imgs")), DataError);
  write_raw(tmp.path("lbls"), make_labels({1}, /*magic=*/0x803));
  EXPECT_THROW(load_idx_labels(tmp.path("lbls")), DataError);
}

TEST(Dataset, RejectsTruncatedPayload) {
  TempDir tmp;
  auto imgs = make_images(2, 2, 2);
  imgs.pop_back();
  write_raw(tmp.path("imgs"), imgs);
  EXPECT_THROW(load_idx_images(tmp.path("imgs")), DataError);

  auto lbls = make_labels({0, 1, 2});
  lbls.push_back(7);  // trailing junk
  write_raw(tmp.path("lbls"), lbls);
  EXPECT_THROW(load_idx_labels(tmp.path("lbls")), DataError);

  write_raw(tmp.path("short"), std::vector<unsigned char>{0, 0});
  EXPECT_THROW(load_idx_images(tmp.path("short")), DataError);
}

TEST(Dataset, RejectsLabelOutOfRange) {
  TempDir tmp;
  write_raw(tmp.path("lbls"), make_labels({3, 10}));
  EXPECT_THROW(load_idx_labels(tmp.path("lbls")), DataError);
}

TEST(Dataset, RejectsCountMismatch) {
  TempDir tmp;
  write_raw(tmp.path("imgs"), make_images(3, 2, 2));
  write_raw(tmp.path("lbls"), make_labels({1, 2}));
  EXPECT_THROW(load_idx_pair(tmp.path("imgs"), tmp.path("lbls")), DataError);
}

TEST(Dataset, MissingFileReportsPath) {
  TempDir tmp;
  EXPECT_THROW(load_idx_images(tmp.path("absent")), DataError);
  EXPECT_THROW(find_idx_file(tmp.path(""), "nothing-here"), DataError);
}

TEST(Dataset, FindPrefersUncompressed) {
  TempDir tmp;
  const auto imgs = make_images(1, 1, 1);
  write_raw(tmp.path("stem"), imgs);
  write_gz(tmp.path("stem.gz"), make_images(2, 1, 1));
  EXPECT_EQ(find_idx_file(tmp.path(""), "stem"), tmp.path("stem"));
  fs::remove(tmp.path("stem"));
  EXPECT_EQ(find_idx_file(tmp.path(""), "stem"), tmp.path("stem.gz"));
}

TEST(Dataset, BatchEncodesAmplitudes) {
  TempDir tmp;
  write_raw(tmp.path("imgs"), make_images(4, 2, 1));
  write_raw(tmp.path("lbls"), make_labels({0, 1, 2, 3}));
  const Dataset d = load_idx_pair(tmp.path("imgs"), tmp.path("lbls"));
  const std::vector<long> idx = {2, 0};
  const CMat batch = d.batch(idx);
  ASSERT_EQ(batch.rows(), 2);
  ASSERT_EQ(batch.cols(), 2);
  EXPECT_EQ(batch(0, 0), Complex(d.images(0, 2), 0.0));
  EXPECT_EQ(batch(1, 1), Complex(d.images(1, 0), 0.0));
  EXPECT_EQ(d.label_batch(idx), (std::vector<int>{2, 0}));
  const std::vector<long> bad = {5};
  EXPECT_THROW(d.batch(bad), ShapeError);
}

TEST(Dataset, LoadsRealMnistWhenAvailable) {
  const char* env = std::getenv("PCNN_DATA_DIR");
  fs::path root = env ? fs::path(env) : fs::path("data/mnist");
  if (!fs::exists(root / "train-images-idx3-ubyte.gz") &&
      !fs::exists(root / "train-images-idx3-ubyte")) {
    GTEST_SKIP() << "dataset directory not present";
  }
  const MnistData mnist = load_mnist(root);
  EXPECT_EQ(mnist.train.size(), 60000);
  EXPECT_EQ(mnist.test.size(), 10000);
  EXPECT_EQ(mnist.train.images.rows(), 784);
  EXPECT_EQ(mnist.test.image_rows, 28);
}
