#include "cvqkd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cvqkd/dsp.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd::experiment {

using model::kPi;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double wrap_angle(double x) { return std::atan2(std::sin(x), std::cos(x)); }

double per_quadrature_variance(const std::vector<cd>& samples) {
    double acc = 0.0;
    for (const cd& v : samples) acc += std::norm(v);
    return 0.5 * acc / static_cast<double>(samples.size());
}

}  // namespace

double CalibrationRecord::shape_at(double freq) const {
    if (shape.empty()) return 1.0;
    double f = std::fmod(freq, rate);
    if (f < 0.0) f += rate;
    auto idx = static_cast<std::size_t>(f / block_hz);
    if (idx >= shape.size()) idx = shape.size() - 1;
    return shape[idx];
}

std::vector<double> CalibrationRecord::materialize(std::size_t n) const {
    std::vector<double> psd(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) * rate / static_cast<double>(n);
        psd[k] = shape_at(f) * snu_scale;
    }
    return psd;
}

CalibrationRecord CalibrationRecord::flat(double rate_hz) {
    CalibrationRecord rec;
    rec.rate = rate_hz;
    rec.shape.assign(1, 1.0);
    rec.block_hz = rate_hz;
    return rec;
}

CalibrationRecord run_calibration(const ExperimentConfig& config) {
    const auto& f = config.frame;
    const std::size_t n = 2 * f.dac_samples();  // record length at ADC rate
    const double rate = f.adc_rate;

    Waveform zero;
    zero.rate = rate;
    zero.samples.assign(n, cd(0.0, 0.0));

    model::ChannelParams vac = config.channel;
    vac.excess_photons = 0.0;
    vac.electronic_noise_photons = 0.0;
    model::ChannelParams combined = vac;
    combined.electronic_noise_photons = config.channel.electronic_noise_photons;

    CalibrationRecord rec;
    rec.rate = rate;
    rec.block_hz = 1e6;
    const auto blocks = static_cast<std::size_t>(std::ceil(rate / rec.block_hz));
    std::vector<double> block_power(blocks, 0.0);
    std::vector<std::size_t> block_bins(blocks, 0);
    auto block_of = [&](std::size_t k) {
        const double fr = static_cast<double>(k) * rate / static_cast<double>(n);
        return std::min(static_cast<std::size_t>(fr / rec.block_hz), blocks - 1);
    };

    double vac_var = 0.0, comb_var = 0.0;
    std::vector<std::vector<cd>> vac_spectra, comb_spectra;
    const std::size_t frames = std::max<std::size_t>(1, config.calibration_frames);
    for (std::size_t i = 0; i < frames; ++i) {
        auto vrec = channel::apply_channel(zero, vac, derive_seed(config.seed_base, 0xCA10 + i));
        auto crec =
            channel::apply_channel(zero, combined, derive_seed(config.seed_base, 0xCA90 + i));
        vac_var += per_quadrature_variance(vrec.waveform.samples);
        comb_var += per_quadrature_variance(crec.waveform.samples);

        auto cspec = fft::forward_copy(crec.waveform.samples);
        for (std::size_t k = 0; k < n; ++k) {
            const auto b = block_of(k);
            block_power[b] += std::norm(cspec[k]) / static_cast<double>(n);
            if (i == 0) ++block_bins[b];
        }
        vac_spectra.push_back(fft::forward_copy(vrec.waveform.samples));
        comb_spectra.push_back(std::move(cspec));
    }
    rec.vacuum_variance = vac_var / static_cast<double>(frames);
    rec.combined_variance = comb_var / static_cast<double>(frames);

    rec.shape.resize(blocks);
    double mean_shape = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        rec.shape[b] = block_power[b] /
                       (static_cast<double>(frames) * std::max<std::size_t>(1, block_bins[b]));
        mean_shape += rec.shape[b] * static_cast<double>(block_bins[b]);
    }
    mean_shape /= static_cast<double>(n);
    for (auto& s : rec.shape) s /= mean_shape;

    // Whiten the calibration records by the measured shape: the vacuum
    // variance fixes the SNU scale, the combined variance yields t_hat.
    std::vector<double> white_blocks(blocks, 0.0);
    auto whitened_variance = [&](std::vector<cd> spectrum, bool track_blocks) {
        for (std::size_t k = 0; k < n; ++k) {
            spectrum[k] /= std::sqrt(rec.shape[block_of(k)]);
            if (track_blocks)
                white_blocks[block_of(k)] += std::norm(spectrum[k]) / static_cast<double>(n);
        }
        fft::inverse(spectrum);
        return per_quadrature_variance(spectrum);
    };
    double wv = 0.0, wc = 0.0;
    for (auto& s : vac_spectra) wv += whitened_variance(std::move(s), false);
    for (auto& s : comb_spectra) wc += whitened_variance(std::move(s), true);
    wv /= static_cast<double>(frames);
    wc /= static_cast<double>(frames);
    rec.snu_scale = wv;
    rec.t_hat = wc / wv - 1.0;

    double mx = 0.0, mn = 1e300;
    for (std::size_t b = 0; b < blocks; ++b) {
        if (block_bins[b] == 0) continue;
        const double p = white_blocks[b] / static_cast<double>(frames * block_bins[b]);
        mx = std::max(mx, p);
        mn = std::min(mn, p);
    }
    rec.whitened_flatness_db = (mn > 0.0) ? 10.0 * std::log10(mx / mn) : 0.0;
    return rec;
}

namespace {

struct PilotAnalysis {
    double f_coarse = 0.0;
    double f_fine = 0.0;
    double snr_db = -100.0;
    double r_hat = 0.0;   // per-quadrature in-band noise at symbol-rate samples
    double a2_hat = 0.0;  // pilot line power |A|^2, SNU
    Waveform pilot_wave;  // fine band-passed, still at passband frequency
};

// Two-pass frequency estimate, in-band noise PSD (for R and SNR_pilot)
// and the band-passed pilot, all from the whitened record spectrum.
PilotAnalysis analyze_pilot(const std::vector<cd>& white_spec, double rate, double bandwidth,
                            double combined_linewidth, const txchain::FrameConfig& frame) {
    const std::size_t n = white_spec.size();
    PilotAnalysis out;

    std::vector<double> power(n);
    double total = 0.0, peak = 0.0;
    std::size_t peak_bin = 0;
    for (std::size_t k = 0; k < n; ++k) {
        power[k] = std::norm(white_spec[k]);
        total += power[k];
        if (power[k] > peak) {
            peak = power[k];
            peak_bin = k;
        }
    }
    if (peak < 2.0 * (total / static_cast<double>(n)) * std::log(static_cast<double>(n)))
        throw std::runtime_error("pilot analysis: no detectable tone");
    out.f_coarse = fft::bin_frequency(peak_bin, n, rate);

    auto masked_inverse = [&](double center, double bw) {
        const auto mask = dsp::band_mask(n, rate, center, bw);
        Waveform wave;
        wave.rate = rate;
        wave.samples.resize(n);
        for (std::size_t k = 0; k < n; ++k) wave.samples[k] = white_spec[k] * mask[k];
        fft::inverse(wave.samples);
        return wave;
    };
    // Fit over the full span, matching the reference method's detrend, so
    // the pilot slope and the quantum demodulation share one frequency.
    auto phase_fit = [&](const Waveform& wave) {
        std::vector<double> phase(n);
        for (std::size_t k = 0; k < n; ++k)
            phase[k] = std::atan2(wave.samples[k].imag(), wave.samples[k].real());
        dsp::unwrap(phase);
        auto [slope, icpt] = dsp::fit_line(phase, 0, n);
        (void)icpt;
        return slope * rate / (2.0 * kPi);
    };

    // Pass 1: wide filter centered on the spectral peak.
    const double wide = std::max(std::min(40e6, bandwidth * 8), bandwidth);
    const double f1 = phase_fit(masked_inverse(out.f_coarse, wide));

    // Pass 2: the analysis filter that sets SNR_pilot.
    out.pilot_wave = masked_inverse(f1, bandwidth);
    out.f_fine = phase_fit(out.pilot_wave);

    // Line power and the noise floor beside the band (the pilot skirt
    // must not count as noise). The quantum band, padded for its RRC
    // roll-off tails, is excluded from the noise annulus.
    const double df_hat = out.f_fine - frame.pilot_freq;
    const double q_lo = frame.quantum_band_low() + df_hat - 5e6;
    const double q_hi = frame.quantum_band_high() + df_hat + 5e6;
    const double guard_hz = std::max(10e3, 10.0 * combined_linewidth);
    const auto line =
        channel::analyze_spectral_line(power, rate, peak_bin, bandwidth, guard_hz, q_lo, q_hi);

    const double bin_hz_r = rate / static_cast<double>(n);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    // R for the symbol-rate filter input: the noise PSD scaled to the
    // symbol rate (white-noise equivalent), not the band-integrated
    // power -- the analysis band oversamples the noise and the tracker
    // must not count correlated samples as independent.
    out.r_hat = 0.5 * line.noise_per_bin * (frame.symbol_rate / bin_hz_r) / n2;
    out.a2_hat = line.line_power / n2;

    const double bin_hz = rate / static_cast<double>(n);
    const double band_bins = bandwidth / bin_hz;
    out.snr_db = (line.line_power > 0.0 && line.noise_per_bin > 0.0)
                     ? 10.0 * std::log10(line.line_power / (line.noise_per_bin * band_bins))
                     : -100.0;

    // Blind sanity check: the analysis band must stay clear of the
    // quantum band implied by the offset estimate.
    if (out.f_fine - 0.5 * bandwidth < q_hi && out.f_fine + 0.5 * bandwidth > q_lo)
        throw std::runtime_error("pilot analysis: band overlaps the quantum signal");
    return out;
}

recovery::UkfConfig make_ukf_config(const ExperimentConfig& config, const PilotAnalysis& pilot) {
    recovery::UkfConfig uc;
    uc.linewidth_guess = config.ukf.linewidth_guess;
    uc.measurement_noise = std::max(pilot.r_hat, 1e-15);
    uc.pilot_amplitude = std::sqrt(std::max(pilot.a2_hat, 1e-12));
    uc.freq_offset = 2.0 * kPi * config.ukf.if_freq / config.frame.symbol_rate;
    uc.sample_period = 1.0 / config.frame.symbol_rate;
    uc.ut = config.ukf.ut;
    uc.initial_mean = config.ukf.initial_mean;
    uc.initial_variance = config.ukf.initial_variance;
    uc.adapt_noise = config.ukf.adapt_noise;
    uc.adapt_r = config.ukf.adapt_r;
    return uc;
}

// Pilot samples for the UKF: band-passed pilot decimated on the symbol
// grid, shifted so the configured IF remains; Eq.-3 real-valued form.
std::vector<double> ukf_pilot_input(const PilotAnalysis& pilot, const dsp::SymbolGrid& grid,
                                    double if_freq, double rate) {
    std::vector<double> y(grid.count);
    const double shift = -2.0 * kPi * (pilot.f_fine - if_freq) / rate;
    for (std::size_t k = 0; k < grid.count; ++k) {
        const auto idx = static_cast<std::size_t>(grid.offset +
                                                  static_cast<std::ptrdiff_t>(k) * grid.sps);
        const cd z =
            pilot.pilot_wave.samples[idx] * std::polar(1.0, shift * static_cast<double>(idx));
        y[k] = z.imag();
    }
    return y;
}

struct MethodContext {
    const ExperimentConfig* config = nullptr;
    const std::vector<cd>* raw_symbols = nullptr;
    const std::vector<cd>* header = nullptr;
    const std::vector<cd>* alice = nullptr;
    const model::PhaseTrace* truth = nullptr;  // full-rate ground truth, optional
    double freq_error = 0.0;  // 2 pi (df_true - df_hat) / rate, rad per sample
    dsp::SymbolGrid grid;
    double t_trusted = 0.022;
};

FrameEstimate estimate_with_phase(const MethodContext& ctx, const recovery::TrackResult& track) {
    FrameEstimate out;
    try {
        const auto& cfg = *ctx.config;
        auto syms = recovery::compensate(*ctx.raw_symbols, track.phase);

        // Bulk phase from the compensated CAZAC header.
        const std::size_t hdr = cfg.frame.cazac_symbols;
        cd corr = 0.0;
        double e_sym = 0.0, e_hdr = 0.0;
        for (std::size_t k = 0; k < hdr; ++k) {
            corr += syms[k] * std::conj((*ctx.header)[k]);
            e_sym += std::norm(syms[k]);
            e_hdr += std::norm((*ctx.header)[k]);
        }
        out.sync_metric = std::abs(corr) / std::sqrt(e_sym * e_hdr);
        if (out.sync_metric < 0.5)
            throw std::runtime_error("sync not found (header correlation below threshold)");
        const double bulk = std::arg(corr);

        std::vector<cd> bob(syms.begin() + static_cast<std::ptrdiff_t>(hdr), syms.end());
        const cd derot = std::polar(1.0, -bulk);
        for (auto& b : bob) b *= derot;

        if (ctx.alice) {
            const double N = cfg.frame.mean_photons;
            const double alice_scale = std::sqrt(2.0 * N / cfg.frame.modulation_variance);
            std::vector<cd> alice_scaled(*ctx.alice);
            for (auto& a : alice_scaled) a *= alice_scale;
            out.cov = secrecy::estimate_covariance(alice_scaled, bob, N);
            out.est = secrecy::infer_channel(out.cov, ctx.t_trusted);
        }

        if (ctx.truth) {
            // Residual rotation left on the payload after compensation.
            std::vector<double> resid(cfg.frame.frame_symbols);
            cd mean_rot = 0.0;
            for (std::size_t k = 0; k < resid.size(); ++k) {
                const std::size_t sym = hdr + k;
                const auto idx = static_cast<std::size_t>(
                    ctx.grid.offset + static_cast<std::ptrdiff_t>(sym) * ctx.grid.sps);
                const double phi_true =
                    ctx.truth->values[idx] + ctx.freq_error * static_cast<double>(idx);
                resid[k] = wrap_angle(phi_true - track.phase.values[sym] - bulk);
                mean_rot += std::polar(1.0, resid[k]);
            }
            const double mean_angle = std::arg(mean_rot);
            double acc = 0.0;
            for (double rr : resid) {
                const double d = wrap_angle(rr - mean_angle);
                acc += d * d;
            }
            out.rms_phase_error = std::sqrt(acc / static_cast<double>(resid.size()));
        }
        out.ok = true;
    } catch (const std::exception& ex) {
        out.ok = false;
        out.error = ex.what();
    }
    return out;
}

}  // namespace

FrameOutput process_reception(const ExperimentConfig& config, const CalibrationRecord& calib,
                              double bandwidth, const Waveform& rx,
                              const std::vector<cd>* alice_symbols,
                              const model::PhaseTrace* true_phase, bool full_sync) {
    const auto& f = config.frame;
    const double rate = rx.rate;
    const std::size_t n = rx.size();

    // Whitening and SNU scaling in one frequency-domain pass.
    auto spec = fft::forward_copy(rx.samples);
    {
        const auto psd = calib.materialize(n);
        for (std::size_t k = 0; k < n; ++k) spec[k] /= std::sqrt(psd[k]);
    }

    PilotAnalysis pilot =
        analyze_pilot(spec, rate, bandwidth, config.channel.lasers.combined_linewidth(), f);

    // Whitened record to the time domain, quantum band shifted to DC with
    // the pilot-derived offset estimate.
    Waveform quantum;
    quantum.rate = rate;
    quantum.samples = std::move(spec);
    fft::inverse(quantum.samples);
    const double df_hat = pilot.f_fine - f.pilot_freq;
    const double wq = 2.0 * kPi * (f.quantum_shift + df_hat) / rate;
    for (std::size_t k = 0; k < n; ++k)
        quantum.samples[k] *= std::polar(1.0, -wq * static_cast<double>(k));

    const int sps = f.sps_adc();
    const auto rx_kernel = dsp::rrc_kernel(f.rrc_rolloff, sps, (f.rrc_taps - 1) / f.sps_dac());

    dsp::SymbolGrid grid;
    grid.offset = static_cast<std::ptrdiff_t>(2 * f.guard_samples);
    grid.sps = sps;
    grid.count = f.total_symbols();

    const auto header = txchain::cazac_sequence(f.cazac_symbols, f.cazac_root);

    std::vector<cd> raw;
    std::ptrdiff_t sync_offset = grid.offset;
    if (full_sync) {
        // Header could sit anywhere (replayed record): matched filter the
        // whole record, compensate with the reference phase so the
        // correlation stays coherent, and search all lags.
        Waveform filtered;
        filtered.rate = rate;
        filtered.samples = dsp::conv_same(quantum.samples, rx_kernel);
        auto ref_full = dsp::hilbert_phase(pilot.pilot_wave);
        dsp::detrend(ref_full.values);
        Waveform search = filtered;
        for (std::size_t k = 0; k < n; ++k)
            search.samples[k] *= std::polar(1.0, -ref_full.values[k]);
        auto sync = dsp::synchronize(search, header, sps);
        grid.offset = sync.sample_offset;
        sync_offset = sync.sample_offset;
        raw = dsp::downsample_to_symbols(filtered, grid);
    } else {
        // Simulated chain introduces no delay; decimate on the nominal
        // grid (the per-method header metric still validates it).
        raw = dsp::matched_filter_decimate(quantum, rx_kernel, grid);
    }
    quantum.samples.clear();
    quantum.samples.shrink_to_fit();

    FrameOutput out;
    out.snr_db = pilot.snr_db;
    out.freq_estimate = pilot.f_fine;
    out.sync_offset = sync_offset;

    MethodContext ctx;
    ctx.config = &config;
    ctx.raw_symbols = &raw;
    ctx.header = &header;
    ctx.alice = alice_symbols;
    ctx.truth = true_phase;
    ctx.freq_error = 2.0 * kPi * (config.channel.lasers.frequency_offset - df_hat) / rate;
    ctx.grid = grid;
    ctx.t_trusted = config.secrecy.trusted_t >= 0.0 ? config.secrecy.trusted_t : calib.t_hat;

    if (config.use_reference) {
        out.reference_track = recovery::reference_track(pilot.pilot_wave, grid, f.symbol_rate);
        out.reference = estimate_with_phase(ctx, out.reference_track);
    }
    if (config.use_ukf) {
        const auto y = ukf_pilot_input(pilot, grid, config.ukf.if_freq, rate);
        out.ukf_track = recovery::ukf_track(std::span<const double>(y),
                                            make_ukf_config(config, pilot));
        out.ukf = estimate_with_phase(ctx, out.ukf_track);
    }
    return out;
}

FrameOutput process_frame(const ExperimentConfig& config, const CalibrationRecord& calib,
                          double bandwidth, std::uint64_t seed) {
    const auto& f = config.frame;
    auto symbols = txchain::generate_symbols(f, derive_seed(seed, 1));
    auto dac = txchain::synthesize_frame(f, symbols);
    auto adc = dsp::resample_double(dac);
    dac.samples.clear();
    dac.samples.shrink_to_fit();
    auto rec = channel::apply_channel(adc, config.channel, derive_seed(seed, 2));
    adc.samples.clear();
    adc.samples.shrink_to_fit();
    return process_reception(config, calib, bandwidth, rec.waveform, &symbols.alice_symbols,
                             &rec.true_phase, false);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const CalibrationRecord* calibration) {
    CalibrationRecord local;
    if (!calibration) {
        local = run_calibration(config);
        calibration = &local;
    }

    const std::size_t frames = config.effective_frames();
    const std::size_t points = config.sweep_bandwidths.size();
    struct Slot {
        double snr_db = 0.0;
        FrameEstimate reference, ukf;
    };
    std::vector<Slot> slots(points * frames);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= slots.size()) return;
            const std::size_t point = job / frames;
            const std::size_t frame = job % frames;
            Slot& slot = slots[job];
            try {
                auto result = process_frame(config, *calibration,
                                            config.sweep_bandwidths[point],
                                            frame_seed(config.seed_base, point, frame));
                slot.snr_db = result.snr_db;
                slot.reference = result.reference;
                slot.ukf = result.ukf;
            } catch (const std::exception& ex) {
                slot.reference.ok = false;
                slot.reference.error = ex.what();
                slot.ukf.ok = false;
                slot.ukf.error = ex.what();
            }
        }
    };
    std::size_t nthreads =
        config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min<std::size_t>(nthreads, slots.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    }

    const double t_used =
        config.secrecy.trusted_t >= 0.0 ? config.secrecy.trusted_t : calibration->t_hat;

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < points; ++p) {
        struct Agg {
            std::vector<double> e, eta;
            double snr = 0.0;
        };
        Agg agg[2];
        for (std::size_t i = 0; i < frames; ++i) {
            const Slot& slot = slots[p * frames + i];
            const FrameEstimate* est[2] = {&slot.reference, &slot.ukf};
            for (int m = 0; m < 2; ++m) {
                if (!est[m]->ok) continue;
                agg[m].e.push_back(est[m]->est.e_hat_minus_trusted);
                agg[m].eta.push_back(est[m]->est.eta_hat);
                agg[m].snr += slot.snr_db;
            }
        }
        auto make_row = [&](const char* name, const Agg& a) {
            SweepRow row;
            row.bandwidth_hz = config.sweep_bandwidths[p];
            row.method = name;
            row.frames = a.e.size();
            if (a.e.empty()) return row;
            const double cnt = static_cast<double>(a.e.size());
            row.snr_pilot_db = a.snr / cnt;
            row.e_mean = std::accumulate(a.e.begin(), a.e.end(), 0.0) / cnt;
            double var = 0.0;
            for (double e : a.e) var += (e - row.e_mean) * (e - row.e_mean);
            row.e_std = std::sqrt(var / cnt);
            row.eta_mean = std::accumulate(a.eta.begin(), a.eta.end(), 0.0) / cnt;
            secrecy::KeyRateInputs kin;
            kin.N = config.frame.mean_photons;
            kin.eta = row.eta_mean;
            kin.e = row.e_mean;
            kin.beta = config.secrecy.beta;
            kin.trusted_detector_efficiency = config.channel.detector_efficiency;
            kin.trusted_electronic_photons = t_used;
            row.key_rate = secrecy::secret_key_rate(kin).raw;
            return row;
        };
        if (config.use_reference) rows.push_back(make_row("reference", agg[0]));
        if (config.use_ukf) rows.push_back(make_row("ukf", agg[1]));
    }

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.bandwidth_hz != b.bandwidth_hz) return a.bandwidth_hz < b.bandwidth_hz;
        return a.method < b.method;
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "snr_pilot_db,method,e_mean,e_std,eta_mean,key_rate,frames\n";
    for (const auto& r : rows) {
        out << fmt(r.snr_pilot_db) << ',' << r.method << ',' << fmt(r.e_mean) << ','
            << fmt(r.e_std) << ',' << fmt(r.eta_mean) << ',' << fmt(r.key_rate) << ','
            << r.frames << '\n';
    }
    return out.str();
}

ConvergenceResult run_convergence(const ExperimentConfig& config,
                                  const std::vector<double>& guesses, double snr_db,
                                  bool adapt) {
    if (guesses.empty()) throw std::invalid_argument("run_convergence: no guesses");
    for (double g : guesses)
        if (!(g > 0.0)) throw std::invalid_argument("run_convergence: guesses must be > 0");

    const std::size_t n = config.frame.frame_symbols;
    const double t_sym = 1.0 / config.frame.symbol_rate;
    const double true_lw = config.channel.lasers.combined_linewidth();

    ConvergenceResult result;
    auto truth = model::wiener_phase_noise(n, true_lw, t_sym, derive_seed(config.seed_base, 0xC0));
    result.theta_true = std::move(truth.values);
    for (auto& v : result.theta_true) v += 1.0;  // unknown bulk phase at start-up

    const double amplitude = 1.0;
    const double r = amplitude * amplitude / (2.0 * std::pow(10.0, snr_db / 10.0));
    const double dw = 2.0 * kPi * config.ukf.if_freq / config.frame.symbol_rate;

    std::vector<double> y(n);
    {
        Rng rng(derive_seed(config.seed_base, 0xC1));
        std::normal_distribution<double> gauss(0.0, std::sqrt(r));
        for (std::size_t k = 0; k < n; ++k)
            y[k] = amplitude * std::sin(dw * static_cast<double>(k) + result.theta_true[k]) +
                   gauss(rng);
    }

    result.correct_index = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        const double d = std::abs(std::log(guesses[i] / true_lw));
        if (d < best) {
            best = d;
            result.correct_index = i;
        }
    }

    const std::size_t tail = std::min<std::size_t>(10'000, std::max<std::size_t>(1, n / 2));
    std::vector<std::vector<double>> errors(guesses.size());
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        recovery::UkfConfig uc;
        uc.linewidth_guess = guesses[i];
        uc.measurement_noise = r;
        uc.pilot_amplitude = amplitude;
        uc.freq_offset = dw;
        uc.sample_period = t_sym;
        uc.ut = config.ukf.ut;
        uc.initial_mean = config.ukf.initial_mean;
        uc.initial_variance = config.ukf.initial_variance;
        uc.adapt_noise = adapt;
        uc.seed = derive_seed(config.seed_base, 0xC2 + i);

        auto track = recovery::ukf_track(std::span<const double>(y), uc);

        ConvergenceTrace trace;
        trace.guess_hz = guesses[i];
        trace.posterior_converged_at = track.converged_at;
        trace.theta_hat = std::move(track.phase.values);
        trace.posterior_std = std::move(track.posterior_std);

        auto& err = errors[i];
        err.resize(n);
        double full = 0.0, fin = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            err[k] = wrap_angle(trace.theta_hat[k] - result.theta_true[k]);
            full += err[k] * err[k];
            if (k >= n - tail) fin += err[k] * err[k];
        }
        trace.rms_full = std::sqrt(full / static_cast<double>(n));
        trace.rms_final = std::sqrt(fin / static_cast<double>(tail));
        result.traces.push_back(std::move(trace));
    }

    result.threshold = 2.0 * result.traces[result.correct_index].rms_final;

    // Error-based settling: one past the last leading window whose RMS
    // exceeds the threshold set by the correct guess's steady state.
    const std::size_t window = std::min<std::size_t>(512, n);
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        const auto& err = errors[i];
        double acc = 0.0;
        for (std::size_t k = n - window; k < n; ++k) acc += err[k] * err[k];
        std::size_t converged = 0;
        for (std::size_t k = n - window;; --k) {
            if (std::sqrt(acc / static_cast<double>(window)) > result.threshold) {
                converged = k + 1;
                break;
            }
            if (k == 0) break;
            acc += err[k - 1] * err[k - 1] - err[k - 1 + window] * err[k - 1 + window];
        }
        result.traces[i].converged_at = converged;
    }
    return result;
}

std::string convergence_csv(const ConvergenceResult& result, std::size_t decimate) {
    if (decimate == 0) decimate = 1;
    std::ostringstream out;
    out << "guess_hz,symbol_index,theta_hat,posterior_std\n";
    for (const auto& trace : result.traces) {
        for (std::size_t k = 0; k < trace.theta_hat.size(); k += decimate) {
            out << fmt(trace.guess_hz) << ',' << k << ',' << fmt(trace.theta_hat[k]) << ','
                << fmt(trace.posterior_std[k]) << '\n';
        }
    }
    return out.str();
}

CalibrationReport calibration_report(const ExperimentConfig& config) {
    CalibrationReport report;
    report.record = run_calibration(config);
    std::ostringstream out;
    out << "calibration over " << config.calibration_frames << " noise-only records\n"
        << "  vacuum variance (per quadrature):   " << fmt(report.record.vacuum_variance) << "\n"
        << "  vacuum+electronic variance:         " << fmt(report.record.combined_variance)
        << "\n"
        << "  SNU scale:                          " << fmt(report.record.snu_scale) << "\n"
        << "  measured electronic photons t_hat:  " << fmt(report.record.t_hat) << "\n"
        << "  whitened PSD flatness:              " << fmt(report.record.whitened_flatness_db)
        << " dB\n";
    report.text = out.str();
    return report;
}

}  // namespace cvqkd::experiment
