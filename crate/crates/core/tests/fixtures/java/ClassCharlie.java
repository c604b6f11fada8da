public class ClassCharlie {
    public static void main(String[] args) {
        int left = 3;
        int right = 4;
        System.out.println(left + right);
    }
}
