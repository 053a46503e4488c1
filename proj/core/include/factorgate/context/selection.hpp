#pragma once

#include "factorgate/dsl/catalog.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace factorgate::context {

enum class ParseStatus { clean, recovered, unparsable };

std::string_view status_name(ParseStatus s);

struct RawResponse {
    std::string text;
    std::vector<std::string> selection;    // catalog ids, catalog order, no duplicates
    ParseStatus status = ParseStatus::unparsable;
    std::vector<std::string> invalid_ids;  // emitted names absent from the catalog
};

// Reads the last <selection>...</selection> block (comma or whitespace
// separated). Without a block, falls back to id-like tokens anywhere in the
// text; if none of those is in the catalog the response is unparsable and
// both lists are empty. Never throws.
RawResponse parse_selection(std::string_view text, const dsl::FactorCatalog& catalog);

// Id-like tokens (letters, digits, underscore, numeric suffix) in order of appearance.
std::vector<std::string> find_id_tokens(std::string_view text);

// Text outside the last selection block.
std::string reasoning_text(std::string_view text);

}  // namespace factorgate::context
