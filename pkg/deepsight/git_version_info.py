git_hash = None
git_branch = None
