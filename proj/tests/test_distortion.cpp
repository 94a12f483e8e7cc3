#include <doctest.h>

#include "mqaf/corpus.hpp"
#include "mqaf/distortion.hpp"

using namespace mqaf;

TEST_CASE("contrast scaling fixes constant mid-gray") {
  const ImageBuffer gray = make_image(16, 16, 128);
  const ImageBuffer out =
      apply_distortion(gray, DistortionType::kContrastScaling, 5, 1);
  CHECK(out == gray);
}

TEST_CASE("gaussian blur fixes any constant image") {
  for (int severity = 1; severity <= 5; ++severity) {
    const ImageBuffer flat = make_image(20, 20, 77);
    const ImageBuffer out =
        apply_distortion(flat, DistortionType::kGaussianBlur, severity, 1);
    CAPTURE(severity);
    CHECK(out == flat);
  }
}

TEST_CASE("severity outside 1..5 is rejected") {
  const ImageBuffer img = make_image(8, 8, 10);
  CHECK_THROWS_AS(apply_distortion(img, DistortionType::kGaussianNoise, 0, 1),
                  ConfigError);
  CHECK_THROWS_AS(apply_distortion(img, DistortionType::kGaussianNoise, 6, 1),
                  ConfigError);
}

TEST_CASE("distortions are deterministic under a fixed seed") {
  const ImageBuffer ref = synth_reference(32, 5);
  for (DistortionType t : kAllDistortions) {
    const ImageBuffer a = apply_distortion(ref, t, 3, 42);
    const ImageBuffer b = apply_distortion(ref, t, 3, 42);
    CAPTURE(distortion_name(t));
    CHECK(a == b);
  }
}

TEST_CASE("every distortion at every severity changes a textured image") {
  const ImageBuffer ref = synth_reference(40, 9);
  for (DistortionType t : kAllDistortions)
    for (int severity = 1; severity <= 5; ++severity) {
      const ImageBuffer out = apply_distortion(ref, t, severity, 3);
      CAPTURE(distortion_name(t));
      CAPTURE(severity);
      CHECK(out.pixels != ref.pixels);
    }
}

TEST_CASE("mean psnr of light noise beats heavy noise over 10 references") {
  double mean1 = 0.0, mean5 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const ImageBuffer ref = synth_reference(32, 100 + i);
    mean1 += psnr(apply_distortion(ref, DistortionType::kGaussianNoise, 1, i),
                  ref);
    mean5 += psnr(apply_distortion(ref, DistortionType::kGaussianNoise, 5, i),
                  ref);
  }
  CHECK(mean1 > mean5);
}

TEST_CASE("distortion names round-trip") {
  for (DistortionType t : kAllDistortions)
    CHECK(distortion_from_name(distortion_name(t)) == t);
  CHECK_THROWS_AS(distortion_from_name("vignette"), ConfigError);
}
