#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "mhmm/geometry/family.hpp"
#include "mhmm/geometry/isometry.hpp"
#include "mhmm/geometry/point.hpp"
#include "mhmm/numerics/quadrature.hpp"
#include "support/test_support.hpp"

using namespace mhmm;
using namespace mhmm::geometry;
using Catch::Approx;
using test_support::random_isometry;
using test_support::random_point;

TEST_CASE("point validation") {
  REQUIRE_THROWS_AS(ManifoldPoint::disk({1.0, 0.0}), DomainError);
  REQUIRE_THROWS_AS(ManifoldPoint::sphere(Eigen::Vector3d(1.0, 0.5, 0.0)),
                    DomainError);
  Eigen::Matrix2d not_pd;
  not_pd << 1.0, 2.0, 2.0, 1.0;
  REQUIRE_THROWS_AS(ManifoldPoint::spd(not_pd), DomainError);
  Eigen::Matrix2d asym;
  asym << 1.0, 0.1, 0.0, 1.0;
  REQUIRE_THROWS_AS(ManifoldPoint::spd(asym), DomainError);
  REQUIRE_NOTHROW(ManifoldPoint::disk({0.999, 0.0}));
}

TEST_CASE("riemannian distances") {
  SECTION("disk") {
    REQUIRE(riemannian_distance(ManifoldPoint::disk(0.0),
                                ManifoldPoint::disk(0.0)) == 0.0);
    REQUIRE(riemannian_distance(ManifoldPoint::disk({0.0, 0.3}),
                                ManifoldPoint::disk({0.0, 0.3})) == 0.0);
    // d(0, r) = 2 atanh r = acosh(1 + 2 r^2/(1-r^2))
    const double d = riemannian_distance(ManifoldPoint::disk(0.0),
                                         ManifoldPoint::disk({0.5, 0.0}));
    REQUIRE(d == Approx(1.098612288668109691395).epsilon(1e-14));
    REQUIRE(d == Approx(std::acosh(1.0 + 2.0 * 0.25 / 0.75)).epsilon(1e-14));
  }
  SECTION("spd: d(I, diag(e, 1/e)) = sqrt(2)") {
    Eigen::Matrix2d d2 = Eigen::Vector2d(std::exp(1.0), std::exp(-1.0)).asDiagonal();
    REQUIRE(riemannian_distance(
                ManifoldPoint::spd(Eigen::Matrix2d::Identity()),
                ManifoldPoint::spd(d2)) == Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
  SECTION("sphere") {
    REQUIRE(riemannian_distance(
                ManifoldPoint::sphere(Eigen::Vector3d(1, 0, 0)),
                ManifoldPoint::sphere(Eigen::Vector3d(0, 1, 0))) ==
            Approx(0.5 * special::kPi).epsilon(1e-14));
  }
  SECTION("manifold mismatch") {
    REQUIRE_THROWS_AS(
        riemannian_distance(ManifoldPoint::disk(0.0),
                            ManifoldPoint::sphere(Eigen::Vector3d(1, 0, 0))),
        ManifoldMismatchError);
  }
}

TEST_CASE("distance properties on random points") {
  Rng rng(2024);
  for (Manifold m : {Manifold::Sphere, Manifold::Disk, Manifold::Spd}) {
    const int dim = m == Manifold::Sphere ? 3 : 2;
    for (int i = 0; i < 100; ++i) {
      const auto a = random_point(m, dim, rng);
      const auto b = random_point(m, dim, rng);
      const auto c = random_point(m, dim, rng);
      const double dab = riemannian_distance(a, b);
      const double dba = riemannian_distance(b, a);
      REQUIRE(dab >= 0.0);
      REQUIRE(dab == Approx(dba).margin(1e-12));
      // triangle inequality
      REQUIRE(dab <= riemannian_distance(a, c) + riemannian_distance(c, b) +
                         1e-12);
    }
    // zero iff equal
    const auto p = random_point(m, dim, rng);
    REQUIRE(riemannian_distance(p, p) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("statistic orientation and examples") {
  const DiskGaussianFamily disk;
  const VonMisesFisherFamily vmf(3);

  REQUIRE(disk.statistic(ManifoldPoint::disk({0.2, 0.1}),
                         ManifoldPoint::disk({0.2, 0.1})) ==
          Approx(0.0).margin(1e-300));
  // statistic(0.5, 0) = acosh(5/3)^2
  REQUIRE(disk.statistic(ManifoldPoint::disk({0.5, 0.0}),
                         ManifoldPoint::disk(0.0)) ==
          Approx(1.20694896081258197784).epsilon(1e-13));
  // sphere statistic is the sign-absorbed inner product
  REQUIRE(vmf.statistic(ManifoldPoint::sphere(Eigen::Vector3d(1, 0, 0)),
                        ManifoldPoint::sphere(Eigen::Vector3d(1, 0, 0))) ==
          Approx(-1.0).margin(1e-15));
  REQUIRE_THROWS_AS(
      vmf.statistic(ManifoldPoint::disk(0.0), ManifoldPoint::disk(0.0)),
      ManifoldMismatchError);
}

TEST_CASE("apply_isometry basics") {
  SECTION("identities") {
    const auto y = ManifoldPoint::disk({0.3, -0.2});
    const auto id = IsometryElement(DiskIsometry{1.0, 0.0});
    REQUIRE(std::abs(apply_isometry(id, y).disk_coord() - y.disk_coord()) <
            1e-15);

    const auto ys = ManifoldPoint::sphere(Eigen::Vector3d(0, 0, 1));
    const auto ids =
        IsometryElement(SphereIsometry{Eigen::Matrix3d::Identity()});
    REQUIRE((apply_isometry(ids, ys).sphere_coords() - ys.sphere_coords())
                .norm() < 1e-15);

    Eigen::Matrix2d m;
    m << 2.0, 0.3, 0.3, 1.0;
    const auto yp = ManifoldPoint::spd(m);
    const auto idp = IsometryElement(SpdIsometry{Eigen::Matrix2d::Identity()});
    REQUIRE((apply_isometry(idp, yp).spd_matrix() - m).norm() < 1e-15);
  }
  SECTION("invalid elements rejected") {
    Eigen::Matrix3d bad = 2.0 * Eigen::Matrix3d::Identity();
    REQUIRE_THROWS_AS(IsometryElement(SphereIsometry{bad}), DomainError);
    REQUIRE_THROWS_AS(IsometryElement(DiskIsometry{1.0, 1.0}), DomainError);
    REQUIRE_THROWS_AS(IsometryElement(SpdIsometry{Eigen::Matrix2d::Zero()}),
                      DomainError);
  }
}

TEST_CASE("isometries preserve distances") {
  Rng rng(77);
  for (Manifold m : {Manifold::Sphere, Manifold::Disk, Manifold::Spd}) {
    const int dim = m == Manifold::Sphere ? 4 : 2;
    for (int i = 0; i < 50; ++i) {
      const auto g = random_isometry(m, dim, rng);
      const auto a = random_point(m, dim, rng);
      const auto b = random_point(m, dim, rng);
      REQUIRE(riemannian_distance(apply_isometry(g, a), apply_isometry(g, b)) ==
              Approx(riemannian_distance(a, b)).margin(1e-10));
    }
  }
}

TEST_CASE("isometry_to maps the base point to the target") {
  Rng rng(88);
  SECTION("base to base is the identity action") {
    for (Manifold m : {Manifold::Sphere, Manifold::Disk, Manifold::Spd}) {
      const int dim = m == Manifold::Sphere ? 3 : 2;
      const auto base = base_point(m, dim);
      const auto g = isometry_to(base);
      REQUIRE(riemannian_distance(apply_isometry(g, base), base) < 1e-12);
    }
  }
  SECTION("sphere: e1 -> e2 by a Givens rotation") {
    Eigen::Vector3d e2(0, 1, 0);
    const auto g = isometry_to(ManifoldPoint::sphere(e2));
    const auto image = apply_isometry(g, base_point(Manifold::Sphere, 3));
    REQUIRE((image.sphere_coords() - e2).norm() < 1e-12);
    const auto& rot = g.as<SphereIsometry>().rotation;
    REQUIRE(rot(0, 0) == Approx(0.0).margin(1e-15));
    REQUIRE(rot(1, 0) == Approx(1.0).margin(1e-15));
    REQUIRE(rot(2, 2) == Approx(1.0).margin(1e-15));
  }
  SECTION("random targets, all manifolds") {
    // coordinate-space comparison: arccos / sqrt based distances cannot
    // resolve below ~1e-8 near coincident points
    auto coordinate_gap = [](const ManifoldPoint& a, const ManifoldPoint& b) {
      switch (a.manifold()) {
        case Manifold::Sphere:
          return (a.sphere_coords() - b.sphere_coords()).cwiseAbs().maxCoeff();
        case Manifold::Disk:
          return std::abs(a.disk_coord() - b.disk_coord());
        case Manifold::Spd:
          return (a.spd_matrix() - b.spd_matrix()).cwiseAbs().maxCoeff();
      }
      return 0.0;
    };
    for (Manifold m : {Manifold::Sphere, Manifold::Disk, Manifold::Spd}) {
      const int dim = m == Manifold::Sphere ? 3 : 2;
      for (int i = 0; i < 25; ++i) {
        const auto target = random_point(m, dim, rng);
        const auto g = isometry_to(target);
        REQUIRE(coordinate_gap(apply_isometry(g, base_point(m, dim)), target) <
                1e-12);
        // and it is distance-preserving
        const auto a = random_point(m, dim, rng);
        const auto b = random_point(m, dim, rng);
        REQUIRE(riemannian_distance(apply_isometry(g, a),
                                    apply_isometry(g, b)) ==
                Approx(riemannian_distance(a, b)).margin(1e-10));
      }
    }
  }
  SECTION("disk Moebius z -> (z+w)/(conj(w) z + 1)") {
    const std::complex<double> w{0.4, -0.3};
    const auto g = isometry_to(ManifoldPoint::disk(w));
    const auto z = ManifoldPoint::disk({-0.2, 0.5});
    const std::complex<double> expected =
        (z.disk_coord() + w) / (std::conj(w) * z.disk_coord() + 1.0);
    REQUIRE(std::abs(apply_isometry(g, z).disk_coord() - expected) < 1e-14);
  }
}

TEST_CASE("group invariance of the statistic") {
  Rng rng(123);
  struct Case {
    Manifold m;
    int dim;
    const LocationScaleFamily* family;
  };
  const VonMisesFisherFamily vmf(3);
  const DiskGaussianFamily disk;
  const SpdGaussianFamily spd(2);
  const Case cases[] = {{Manifold::Sphere, 3, &vmf},
                        {Manifold::Disk, 2, &disk},
                        {Manifold::Spd, 2, &spd}};
  for (const Case& c : cases) {
    for (int i = 0; i < 100; ++i) {
      const auto g = random_isometry(c.m, c.dim, rng);
      const auto y = random_point(c.m, c.dim, rng);
      const auto ybar = random_point(c.m, c.dim, rng);
      const double before = c.family->statistic(y, ybar);
      const double after = c.family->statistic(apply_isometry(g, y),
                                               apply_isometry(g, ybar));
      REQUIRE(after == Approx(before).margin(1e-10));
    }
  }
}

TEST_CASE("log-partition closed forms and domains") {
  SECTION("sphere d=3: e^psi = 4 pi sinh(kappa)/kappa") {
    const VonMisesFisherFamily vmf(3);
    REQUIRE(vmf.log_partition(-2.0) ==
            Approx(3.126244439023513613614).epsilon(1e-13));
    for (double kappa : {0.01, 0.7, 10.0, 500.0}) {
      const double expected =
          std::log(4.0 * special::kPi) + special::log_sinh(kappa) -
          std::log(kappa);
      REQUIRE(vmf.log_partition(-kappa) == Approx(expected).epsilon(1e-12));
    }
  }
  SECTION("disk: log Z(1), quadrature-consistent normalizer") {
    const DiskGaussianFamily disk;
    REQUIRE(disk.log_partition(-0.5) ==
            Approx(2.18195327275194684365).epsilon(1e-13));
  }
  SECTION("sigma/eta domain checks") {
    const DiskGaussianFamily disk;
    REQUIRE_THROWS_AS(disk.log_partition(0.0), DomainError);
    REQUIRE_THROWS_AS(disk.log_partition(-1e-12), DomainError);
    REQUIRE_THROWS_AS(
        disk.log_density(ManifoldPoint::disk(0.0), ManifoldPoint::disk(0.0),
                         1e-6),
        DomainError);
    REQUIRE_THROWS_AS(
        disk.log_density(ManifoldPoint::disk(0.0), ManifoldPoint::disk(0.0),
                         2e4),
        DomainError);
  }
  SECTION("spd only supports d = 2") {
    REQUIRE_THROWS_AS(SpdGaussianFamily(3), DomainError);
  }
}

TEST_CASE("log_density forms") {
  const DiskGaussianFamily disk;
  const auto y = ManifoldPoint::disk({0.3, 0.2});
  const auto ybar = ManifoldPoint::disk({-0.1, 0.4});
  const double sigma = 0.7;
  const double d = riemannian_distance(y, ybar);
  const double expected = -d * d / (2.0 * sigma * sigma) -
                          disk.log_partition(disk.eta_from_sigma(sigma));
  REQUIRE(disk.log_density(y, ybar, sigma) == Approx(expected).epsilon(1e-13));
  // at the centre the density is just -log Z
  REQUIRE(disk.log_density(ybar, ybar, 1.0) ==
          Approx(-2.18195327275194684365).epsilon(1e-13));
}

TEST_CASE("densities integrate to one") {
  const DiskGaussianFamily disk;
  const VonMisesFisherFamily vmf(3);
  const SpdGaussianFamily spd(2);
  const LocationScaleFamily* families[] = {&disk, &vmf, &spd};
  for (const auto* family : families) {
    for (double sigma : {0.3, 0.7, 1.2}) {
      const double z = numerics::quadrature_normalizer(family->manifold(),
                                                       sigma, 256);
      const double psi = family->log_partition(family->eta_from_sigma(sigma));
      REQUIRE(z / std::exp(psi) == Approx(1.0).margin(1e-4));
    }
  }
}

TEST_CASE("psi_prime is strictly increasing (psi strictly convex)") {
  const DiskGaussianFamily disk;
  const VonMisesFisherFamily vmf(3);
  const SpdGaussianFamily spd(2);
  const LocationScaleFamily* families[] = {&disk, &vmf, &spd};
  for (const auto* family : families) {
    std::vector<double> etas;
    for (double sigma : {0.01, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0})
      etas.push_back(family->eta_from_sigma(sigma));
    std::sort(etas.begin(), etas.end());
    double prev = -std::numeric_limits<double>::infinity();
    for (double eta : etas) {
      const double v = family->psi_prime(eta);
      REQUIRE(v > prev);
      prev = v;
    }
    for (double eta : etas) REQUIRE(family->psi_second(eta) > 0.0);
  }
}

TEST_CASE("disk psi_prime closed form vs frozen reference") {
  const DiskGaussianFamily disk;
  REQUIRE(disk.psi_prime(-0.5) ==
          Approx(2.70887490522720678880898950325).epsilon(1e-13));
  REQUIRE(disk.psi_prime(disk.eta_from_sigma(0.5)) ==
          Approx(0.542352711349797075).epsilon(1e-13));
}

TEST_CASE("spd psi matches its quadrature construction") {
  const SpdGaussianFamily spd(2);
  REQUIRE(spd.psi_prime(spd.eta_from_sigma(0.3)) ==
          Approx(0.2727080825911407949509).epsilon(1e-10));
  REQUIRE(spd.psi_prime(spd.eta_from_sigma(1.0)) ==
          Approx(3.344171743735823175983).epsilon(1e-10));
}

TEST_CASE("unit-determinant spd plane is a sqrt(2)-scaled disk") {
  // map z -> exp([[a,b],[b,-a]]) with (a,b) = rho (cos phi, sin phi),
  // rho = d(0,z): classical isometry up to the factor sqrt(2)
  Rng rng(31);
  auto to_sspd = [](std::complex<double> z) {
    const double rho = disk_distance(0.0, z);
    const double phi = std::arg(z);
    Eigen::Matrix2d s;
    s << rho * std::cos(phi), rho * std::sin(phi), rho * std::sin(phi),
        -rho * std::cos(phi);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
    Eigen::Matrix2d y =
        es.eigenvectors() *
        Eigen::Vector2d(std::exp(es.eigenvalues()[0]),
                        std::exp(es.eigenvalues()[1]))
            .asDiagonal() *
        es.eigenvectors().transpose();
    return ManifoldPoint::spd(0.5 * (y + y.transpose().eval()));
  };
  for (int i = 0; i < 20; ++i) {
    const auto za = test_support::random_point(Manifold::Disk, 2, rng);
    const auto zb = test_support::random_point(Manifold::Disk, 2, rng);
    const double d_disk = riemannian_distance(za, zb);
    const double d_spd = riemannian_distance(to_sspd(za.disk_coord()),
                                             to_sspd(zb.disk_coord()));
    REQUIRE(d_spd == Approx(std::sqrt(2.0) * d_disk).margin(1e-10));
    REQUIRE(to_sspd(za.disk_coord()).spd_matrix().determinant() ==
            Approx(1.0).margin(1e-12));
  }
}
