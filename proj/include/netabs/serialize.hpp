#pragma once

// JSON encodings. Matrices are nested row-major arrays; an empty matrix with
// a nonzero dimension is written as {"shape": [rows, cols]}.
// Infinite values are written as the strings "inf" / "-inf".

#include <json.hpp>

#include <string>

#include "netabs/casestudy.hpp"
#include "netabs/compose.hpp"
#include "netabs/storage.hpp"
#include "netabs/synthesis.hpp"
#include "netabs/sysmodel.hpp"

namespace netabs {

using Json = nlohmann::json;

Json number_to_json(double v);
/// Accepts numbers and "inf"/"-inf". Throws BadScenario with `what` in the message.
double number_from_json(const Json& j, const std::string& what);

Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& what);

/// Rejects keys of `j` (an object) outside `allowed`.
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what);

Json to_json(const SlopeRestrictedFunction& phi);
SlopeRestrictedFunction nonlinearity_from_json(const Json& j);

Json to_json(const NonlinearControlSystem& sys);
/// Keys A, B, C1, C2, D (required), E, F, phi (optional). Empty C2/D are
/// widened to 0 x n / n x 0.
NonlinearControlSystem system_from_json(const Json& j);

Json to_json(const StorageCertificate& cert);
/// Requires Mhat, K, Z, W, X11, X12, X21, X22, kappa_hat; the remaining
/// fields are optional.
StorageCertificate certificate_from_json(const Json& j);

Json to_json(const VerificationReport& report);
Json to_json(const ComparisonFunctions& cf);
Json to_json(const AbstractionResult& result);
Json to_json(const CompositionCertificate& cc);
Json to_json(const SmallGainRecord& rec);

/// Margins, residuals, bound statistics and the small-gain record of a run.
Json run_summary(const RunArtifacts& art);

}  // namespace netabs
