#include "resdual/reports.hpp"

#include <cstdio>
#include <fstream>

#include "resdual/attention.hpp"
#include "resdual/errors.hpp"

namespace resdual {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ordered_json window_json(std::int64_t window) {
    if (window == kFullWindow) return "full";
    return window;
}

std::string window_str(std::int64_t window) {
    return window == kFullWindow ? "full" : std::to_string(window);
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("write: cannot open " + tmp);
        out << content;
        if (!out) throw io_error("write: failed writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw io_error("write: cannot rename " + tmp + " to " + path);
}

}  // namespace resdual
