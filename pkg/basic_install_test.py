import importlib

import torch

try:
    import deepsight as dsi
    print("deepsight successfully imported")
except ImportError as err:
    raise err

print(f"torch version: {torch.__version__}")

print(f"deepsight info: {dsi.__version__}, {dsi.__git_hash__}, {dsi.__git_branch__}")

for name in ("numpy", "cv2", "PIL", "flask", "requests"):
    try:
        module = importlib.import_module(name)
        print("{} {} successfully imported".format(name, getattr(module, "__version__", "")))
    except Exception as err:
        raise err
