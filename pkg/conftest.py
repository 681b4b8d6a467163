# Present so that pytest puts the repository root on sys.path and the
# deepsight package imports without installation.
