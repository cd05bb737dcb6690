#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rhfe/estimator.hpp"
#include "rhfe/simulator.hpp"
#include "rhfe/system_model.hpp"

namespace rhfe::io {

/// Sidecar record: 8-byte magic "RHFEMAT\0", uint32 rows, uint32 cols, then
/// rows*cols little-endian doubles in row-major order.
void write_matrix_record(std::ostream& os, const Matrix& m);
Matrix read_matrix_record(std::istream& is);

void write_sidecar(const std::string& path, const std::vector<Matrix>& mats);
std::vector<Matrix> read_sidecar(const std::string& path);

/// Model file: {"A": {"rows", "cols", "data"}, ..., "Ky": optional}. Data row-major.
struct ModelFile {
    StateSpaceModel model;
    std::optional<Matrix> Ky;
};
std::string model_to_json(const StateSpaceModel& model, const Matrix* Ky = nullptr);
ModelFile model_from_json(const std::string& text);
ModelFile load_model(const std::string& path);
void save_model(const std::string& path, const StateSpaceModel& model, const Matrix* Ky = nullptr);

/// Identification result: JSON with p, n_bar, Sigma_e_hat and H blocks; the
/// N_bar-wide M blocks go to `<stem>.bin` next to the JSON file.
void save_identification(const std::string& json_path, const MarkovSet& ms, const FaultConfig& cfg);
MarkovSet load_identification(const std::string& json_path, FaultConfig* cfg = nullptr);

/// Estimator: JSON header plus a sidecar holding Gmat, Ty and Tu.
void save_estimator(const std::string& json_path, const EstimatorGain& g);
EstimatorGain load_estimator(const std::string& json_path);

/// Header `k,u1..,y1..,f1..,eta1..`, doubles at 17 significant digits.
std::string trajectory_csv(const TrajectoryDataset& traj);
TrajectoryDataset parse_trajectory_csv(const std::string& text);
void save_trajectory(const std::string& path, const TrajectoryDataset& traj);
TrajectoryDataset load_trajectory(const std::string& path);

/// Per-sample estimates `k,fhat1..`; NaN rows are written as `nan`.
std::string estimates_csv(const Matrix& est);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// %.17g formatting shared by every CSV writer.
std::string fmt(double v);

/// "sensor:1,2", "actuator:1", "both:J,L" with 1-based channel numbers.
FaultConfig parse_fault(const std::string& spec);
std::string fault_to_string(const FaultConfig& cfg);

}  // namespace rhfe::io
