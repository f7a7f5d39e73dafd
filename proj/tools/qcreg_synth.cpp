// qcreg-synth: writes the synthetic inputs used by the examples and tests.

#include <qcreg/intensity.hpp>
#include <qcreg/job.hpp>
#include <qcreg/synthetic.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace qcreg;

namespace {

void write_point_landmarks(const std::string& path, const std::vector<Vec2>& src, const std::vector<Vec2>& dst)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "sx,sy,tx,ty\n";
    char buf[128];
    for (std::size_t k = 0; k < src.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", src[k].x(), src[k].y(), dst[k].x(), dst[k].y());
        os << buf;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Synthetic registration inputs"};
    app.require_subcommand(1);
    std::string out_dir = ".";
    app.add_option("-o,--output-dir", out_dir, "directory for the generated files");

    int n = 65;
    double angle = 2.6, radius = 0.4;
    std::size_t sites = 78;
    auto* swirl = app.add_subcommand("swirl", "landmarks sampled from a swirl of the unit square");
    swirl->add_option("--n", n, "grid size");
    swirl->add_option("--angle", angle, "swirl angle at the center (radians)");
    swirl->add_option("--radius", radius, "swirl falloff radius");
    swirl->add_option("--sites", sites, "number of landmark sites on rings around the center");

    int size = 65;
    double shift_x = 8.0, shift_y = 6.0;
    auto* disk = app.add_subcommand("disk", "translated-disk image pair with 4 landmarks");
    disk->add_option("--size", size, "image side in pixels");
    disk->add_option("--shift-x", shift_x);
    disk->add_option("--shift-y", shift_y);

    auto* letters = app.add_subcommand("letters", "'A' and 'R' image pair with corresponding feature landmarks");

    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(out_dir);
        auto out = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
        if (swirl->parsed()) {
            const auto c = synthetic::swirl_case(n, sites, angle, radius);
            write_landmarks_csv(out("landmarks.csv"), c.constraints.landmarks);
            std::cout << c.constraints.landmarks.size() << " landmarks, max displacement " << c.max_displacement << '\n';
        } else if (disk->parsed()) {
            const auto pair = synthetic::translated_disk(size, Vec2(shift_x, shift_y));
            write_pgm(out("source.pgm"), pair.source);
            write_pgm(out("target.pgm"), pair.target);
            write_point_landmarks(out("landmarks.csv"), pair.source_points, pair.target_points);
        } else if (letters->parsed()) {
            const auto lp = synthetic::letter_pair_a_r();
            write_pgm(out("source.pgm"), lp.source);
            write_pgm(out("target.pgm"), lp.target);
            write_point_landmarks(out("landmarks.csv"), lp.source_points, lp.target_points);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
