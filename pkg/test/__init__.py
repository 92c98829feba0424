# 单元 / oracle / 实验测试包，供 python -m aasmatch.test.xxx 使用
