#pragma once
// Standalone schema document loading (same format as schema.json inside a
// pyramid directory).

#include <string>

#include "polyrag/pyramid.hpp"

namespace polyrag {

OntologySchema load_schema(const std::string& path);
std::string schema_to_json_string(const OntologySchema& schema);

}  // namespace polyrag
