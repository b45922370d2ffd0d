#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eqcl/contrastive.hpp"
#include "eqcl/eval.hpp"
#include "eqcl/nn.hpp"
#include "eqcl/signal.hpp"

namespace eqcl::io {

// EQDS dataset file, little-endian:
//   "EQDS" | version u32 | count u32 | L u32 | class count u32 | flags u32
//   count x { label u16 | snr_db f32 | L x (I f32, Q f32) }
//   class count x { name length u16 | UTF-8 bytes }
// flags bit 0: records are labelled (else label = 0xFFFF)
// flags bit 1: records carry an SNR (else snr_db = NaN)
inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
    std::vector<IqSignal> records;
    std::vector<std::string> class_names;
    std::size_t length = 0;
};

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

// EQSG checkpoint, little-endian:
//   "EQSG" | version u32 | entry count u32
//   entry: name length u16 | UTF-8 name | rank u8 | dims u32[rank] | f32 data
// Adam moments are stored as "adam1/<name>" / "adam2/<name>", the step count
// as "meta/step", extra scalars as "meta/<key>".
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    std::map<std::string, double> meta;  // without the "meta/" prefix; "step" excluded
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Pretraining log CSV: epoch,step,lr,total_loss,loss_ta,loss_ap,loss_fft,loss_emd
std::string pretrain_log_csv(const std::vector<LossRecord>& rows);

std::string report_json(const EvalReport& r);
std::string report_snr_csv(const EvalReport& r);        // snr_db,accuracy
std::string report_confusion_csv(const EvalReport& r);  // C x C grid, header row of class names
// <dir>/<stem>.json, <dir>/<stem>_snr.csv, <dir>/<stem>_confusion.csv
void write_report(const std::filesystem::path& dir, const std::string& stem, const EvalReport& r);

}  // namespace eqcl::io
