#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "gsn/report.hpp"

using namespace gsn;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("report") {
    TEST_CASE("key=value lines round trip, comments and blanks skipped") {
        std::string path = tmp_path("gsn_test_kv.txt");
        KvLines in = {{"mode", "stego"}, {"count", "3"}, {"pe", format_double(0.4175)},
                      {"name", "with spaces and = signs"}};
        write_kv(path, in);
        {
            std::ofstream os(path, std::ios::app);
            os << "# trailing comment\n\n";
        }
        KvLines out = read_kv(path);
        REQUIRE(out.size() == in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            CHECK(out[i].first == in[i].first);
            CHECK(out[i].second == in[i].second);
        }
    }

    TEST_CASE("a line without a separator is rejected") {
        std::string path = tmp_path("gsn_test_kv_bad.txt");
        std::ofstream(path) << "fine=1\nnot a kv line\n";
        CHECK_THROWS(read_kv(path));
    }

    TEST_CASE("detection report serializes every headline number") {
        DetectionReport r;
        r.pe = 0.47;
        r.auc = 0.53;
        r.mae = 2.25;
        r.bit_acc = 0.97;
        r.n_cover = 200;
        r.n_stego = 200;
        KvLines kv = report_to_kv(r);
        auto has = [&](const std::string& k, const std::string& v) {
            for (auto& [key, val] : kv)
                if (key == k) return val == v;
            return false;
        };
        CHECK(has("pe", format_double(0.47)));
        CHECK(has("auc", format_double(0.53)));
        CHECK(has("mae", format_double(2.25)));
        CHECK(has("bit_acc", format_double(0.97)));
        CHECK(has("n_cover", "200"));
        CHECK(has("n_stego", "200"));
    }

    TEST_CASE("plots render as loadable PNGs of the declared size") {
        std::string roc_path = tmp_path("gsn_test_roc.png");
        std::vector<RocPoint> roc = {{0, 0}, {0.1, 0.6}, {0.4, 0.9}, {1, 1}};
        plot_roc(roc_path, roc);
        ImageBatch img = load_png(roc_path);
        CHECK(img.pixels.h() == 480);
        CHECK(img.pixels.w() == 480);

        std::string series_path = tmp_path("gsn_test_series.png");
        plot_series(series_path, {5.0, 3.0, 2.5, 2.5, 2.4});
        ImageBatch s = load_png(series_path);
        CHECK(s.pixels.h() == 480);
        CHECK(s.pixels.w() == 480);

        // flat series must not collapse the vertical range
        plot_series(series_path, {1.0, 1.0, 1.0});
        CHECK(load_png(series_path).pixels.h() == 480);
    }

    TEST_CASE("roc points serialize as a tab-separated table") {
        std::string path = tmp_path("gsn_test_roc.tsv");
        write_roc_points(path, {{0, 0}, {0.25, 0.75}, {1, 1}});
        std::ifstream is(path);
        std::string line;
        std::getline(is, line);
        CHECK(line.substr(0, 1) == "#");
        int rows = 0;
        while (std::getline(is, line))
            if (!line.empty()) {
                CHECK(line.find('\t') != std::string::npos);
                ++rows;
            }
        CHECK(rows == 3);
    }
}
