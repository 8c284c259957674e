#pragma once

#include <string>

#include "weaksep/grid.hpp"
#include "weaksep/plv.hpp"

namespace weaksep {

enum class FileFormat { binary, csv_long };

/// MWFD1 binary format: one UTF-8 JSON header line terminated by '\n' with
/// fields {magic:"MWFD1", n, s_points, t_points, s_factors?, s_weights?,
/// t_weights?}, followed by n*|S|*|T| IEEE-754 64-bit little-endian values
/// in [subject][s][t] row-major order. Phase tensors use n_T in place of n.
///
/// CSV-long format: header `i,s_index,t_index,value`, 0-based indices, every
/// cell present exactly once. Axes default to uniform [0,1] grids.
MultiwayDataset load_dataset(const std::string& path,
                             FileFormat format = FileFormat::binary);
void save_dataset(const MultiwayDataset& data, const std::string& path,
                  FileFormat format = FileFormat::binary);

PhaseTensor load_phase_tensor(const std::string& path);
void save_phase_tensor(const PhaseTensor& tensor, const std::string& path);

}  // namespace weaksep
