#include "etholabel/request.hpp"

#include <sstream>

#include "etholabel/digest.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

std::string compute_request_digest(const ModelRequest& request) {
    std::ostringstream ss;
    for (const RequestPart& part : request.parts) {
        if (const auto* text = std::get_if<TextPart>(&part)) {
            ss << "text\x1f" << text->text << "\x1e";
        } else if (const auto* image = std::get_if<ImagePart>(&part)) {
            ss << "image\x1f" << image->mime << "\x1f" << sha256_hex(image->bytes) << "\x1e";
        } else if (const auto* video = std::get_if<VideoPart>(&part)) {
            ss << "video\x1f" << video->path << "\x1f"
               << (video->start_s ? format_double(*video->start_s) : "-") << "\x1f"
               << (video->end_s ? format_double(*video->end_s) : "-") << "\x1e";
        }
    }
    ss << "temperature=" << format_double(request.decoding.temperature) << "\x1e"
       << "max_output_tokens=" << request.decoding.max_output_tokens << "\x1e"
       << "model=" << request.model_id;
    return sha256_hex(ss.str());
}

}  // namespace etholabel
