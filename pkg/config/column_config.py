# CSV column layout of every artifact; config_digest is appended to each
COLUMN_CONFIG = {
    "ber_report": {
        "columns": ["snr_db", "user", "detector", "ablation", "trials", "mean_ber", "sd_ber", "total_bits"],
        "help": "Noise sweep / symmetry ablation, one row per (snr, user, detector, ablation)"
    },
    "loss_trace": {
        "columns": ["user", "epoch", "loss"],
        "help": "Full training-set MSE after every epoch; epoch 0 is the LLS starting point"
    },
    "decisions": {
        "columns": ["user", "symbol", "detector", "re", "im", "bit0", "bit1"],
        "help": "Soft estimate and hard decision per detected symbol"
    },
    "ber_summary": {
        "columns": ["user", "detector", "ber", "bit_errors", "total_bits"],
        "help": "BER of one detection run per user and detector"
    },
    "bench": {
        "columns": ["path", "dims", "batch", "ns_per_sample", "speedup_vs_naive"],
        "help": "Inference timing per path, median over repeats"
    },
    "dims_study": {
        "columns": ["dims", "trainable_params", "trials", "mean_ber", "sd_ber", "mean_train_seconds"],
        "help": "BER versus training time per hidden-layer configuration"
    },
}

DIGEST_COLUMN = "config_digest"
